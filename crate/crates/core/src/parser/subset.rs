use serde::Serialize;

use super::grammar::MODIFIERS;
use super::lexer::KEYWORDS;

/// One production of the supported subset, in EBNF-like notation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Rule {
    pub name: &'static str,
    pub production: &'static str,
}

/// Machine-readable description of the accepted language subset.
#[derive(Debug, Clone, Serialize)]
pub struct Grammar {
    pub rules: Vec<Rule>,
    pub keywords: Vec<&'static str>,
    pub modifiers: Vec<&'static str>,
    /// Constructs that are lexed but rejected with a syntax error.
    pub excluded: Vec<&'static str>,
}

impl Grammar {
    pub fn rule(&self, name: &str) -> Option<&Rule> {
        self.rules.iter().find(|r| r.name == name)
    }

    /// Whether a construct, given as space-separated leading words such as
    /// `"suspend fun"`, belongs to the subset.
    pub fn accepts(&self, construct: &str) -> bool {
        let words: Vec<&str> = construct.split_whitespace().collect();
        !words.is_empty()
            && words.iter().all(|w| {
                !self.excluded.contains(w)
                    && (self.modifiers.contains(w) || (self.keywords.contains(w)) || self.rule(w).is_some())
            })
    }
}

const RULES: &[(&str, &str)] = &[
    ("file", "packageHeader? importHeader* (topLevelDeclaration semi)*"),
    ("packageHeader", "'package' identifier ('.' identifier)*"),
    ("importHeader", "'import' identifier ('.' identifier)* ('.' '*')?"),
    ("topLevelDeclaration", "modifiers? (functionDeclaration | propertyDeclaration | classDeclaration | interfaceDeclaration | objectDeclaration)"),
    ("modifiers", "(annotation | modifier)+"),
    ("annotation", "'@' identifier ('.' identifier)* valueArguments?"),
    ("classDeclaration", "'class' identifier typeParameters? valueParameters? (':' supertypes)? classBody?"),
    ("interfaceDeclaration", "'interface' identifier typeParameters? (':' supertypes)? classBody?"),
    ("objectDeclaration", "'object' identifier? (':' supertypes)? classBody?"),
    ("supertypes", "type valueArguments? (',' type valueArguments?)*"),
    ("classBody", "'{' enumEntries? (classMember semi)* '}'"),
    ("enumEntries", "enumEntry (',' enumEntry)* ';'?"),
    ("enumEntry", "modifiers? identifier valueArguments?"),
    ("classMember", "'init' block | modifiers? declaration"),
    ("functionDeclaration", "'fun' typeParameters? (receiverType '.')? identifier valueParameters (':' type)? functionBody?"),
    ("functionBody", "block | '=' expression"),
    ("propertyDeclaration", "('val' | 'var') typeParameters? (receiverType '.')? identifier (':' type)? ('=' expression | 'by' expression)?"),
    ("valueParameters", "'(' (parameter (',' parameter)* ','?)? ')'"),
    ("parameter", "modifiers? ('val' | 'var')? identifier ':' type ('=' expression)?"),
    ("typeParameters", "'<' modifiers? identifier (':' type)? (',' modifiers? identifier (':' type)?)* '>'"),
    ("type", "'suspend'? (functionType | '(' type ')' '?'? | userType '?'?)"),
    ("functionType", "'(' (type (',' type)*)? ')' '->' type"),
    ("userType", "identifier typeArguments? ('.' identifier typeArguments?)*"),
    ("typeArguments", "'<' ('*' | ('in' | 'out')? type) (',' ('*' | ('in' | 'out')? type))* '>'"),
    ("block", "'{' (statement semi)* '}'"),
    ("statement", "declaration | forStatement | whileStatement | doWhileStatement | assignment | expression"),
    ("assignment", "assignableExpression ('=' | '+=' | '-=' | '*=' | '/=' | '%=') expression"),
    ("forStatement", "'for' '(' identifier (':' type)? 'in' expression ')' controlBody"),
    ("whileStatement", "'while' '(' expression ')' controlBody"),
    ("doWhileStatement", "'do' controlBody 'while' '(' expression ')'"),
    ("controlBody", "block | statement"),
    ("expression", "disjunction"),
    ("disjunction", "conjunction ('||' conjunction)*"),
    ("conjunction", "equality ('&&' equality)*"),
    ("equality", "comparison (('==' | '!=' | '===' | '!==') comparison)*"),
    ("comparison", "namedCheck (('<' | '>' | '<=' | '>=') namedCheck)*"),
    ("namedCheck", "elvis (('in' | '!in') elvis | ('is' | '!is') type)*"),
    ("elvis", "infixCall ('?:' infixCall)*"),
    ("infixCall", "rangeExpression (identifier rangeExpression)*"),
    ("rangeExpression", "additive (('..' | '..<') additive)*"),
    ("additive", "multiplicative (('+' | '-') multiplicative)*"),
    ("multiplicative", "asExpression (('*' | '/' | '%') asExpression)*"),
    ("asExpression", "prefixExpression (('as' | 'as?') type)*"),
    ("prefixExpression", "('-' | '+' | '!' | '++' | '--') prefixExpression | postfixExpression"),
    ("postfixExpression", "primary (callSuffix | ('.' | '?.') identifier callSuffix? | '[' expression (',' expression)* ']' | '++' | '--' | '!!' | '::' (identifier | 'class'))*"),
    ("callSuffix", "typeArguments? valueArguments? lambda?"),
    ("valueArguments", "'(' (valueArgument (',' valueArgument)* ','?)? ')'"),
    ("valueArgument", "(identifier '=')? '*'? expression"),
    ("primary", "'(' expression ')' | literal | stringTemplate | identifier | 'this' | 'super' | ifExpr | whenExpr | tryExpr | jumpExpression | lambda | '::' identifier"),
    ("literal", "integer | float | character | string | 'true' | 'false' | 'null'"),
    ("stringTemplate", "'\"' (stringContent | '$' identifier | '${' expression '}')* '\"'"),
    ("lambda", "'{' (lambdaParameter (',' lambdaParameter)* '->')? (statement semi)* '}'"),
    ("lambdaParameter", "identifier (':' type)?"),
    ("ifExpr", "'if' '(' expression ')' controlBody (';'? 'else' controlBody)?"),
    ("whenExpr", "'when' ('(' expression ')')? '{' whenEntry* '}'"),
    ("whenEntry", "(whenCondition (',' whenCondition)* | 'else') '->' controlBody semi?"),
    ("whenCondition", "expression | ('in' | '!in') expression | ('is' | '!is') type"),
    ("tryExpr", "'try' block ('catch' '(' identifier ':' type ')' block)* ('finally' block)?"),
    ("jumpExpression", "'return' expression? | 'throw' expression | 'break' | 'continue'"),
    ("semi", "';' | newline"),
];

const EXCLUDED: &[&str] = &[
    "typealias",
    "typeof",
    "constructor",
    "get",
    "set",
    "where",
    "label",
    "destructuring",
    "object-expression",
    "anonymous-function",
];

/// Describes the accepted subset: functions, classes, properties,
/// when/if/try, loops, lambdas, calls, annotations, string templates and
/// modifiers including `suspend`.
pub fn supported_subset() -> Grammar {
    Grammar {
        rules: RULES.iter().map(|&(name, production)| Rule { name, production }).collect(),
        keywords: KEYWORDS.iter().copied().filter(|k| !EXCLUDED.contains(k)).collect(),
        modifiers: MODIFIERS.to_vec(),
        excluded: EXCLUDED.to_vec(),
    }
}
