/// The expert tag set for anomalous code, in order of judged importance.
pub const STANDARD_TAGS: [&str; 30] = [
    "Delegates",
    "Type arguments",
    "When expression",
    "Annotations",
    "Call chains",
    "Enumerations in when",
    "If expressions",
    "Nested calls",
    "Similar call expressions",
    "Strange code constructs",
    "Assignments",
    "Large methods",
    "Code hierarchy",
    "Function parameters",
    "Multiline strings",
    "Try-catch expressions",
    "Arrays or maps",
    "Class references",
    "Concatenations",
    "Lambdas",
    "String literals",
    "Logical expressions",
    "Complex loops",
    "Similar code fragments",
    "Throw expressions",
    "Assertions",
    "Empty string literals",
    "Local variables",
    "Nested functions",
    "Type casts",
];

/// Lookup key for a tag: quote characters removed, whitespace collapsed,
/// lower case.
pub fn normalize_tag(tag: &str) -> String {
    let stripped: String = tag.chars().filter(|c| !matches!(c, '"' | '\'' | '`' | '\u{2018}' | '\u{2019}' | '\u{201C}' | '\u{201D}')).collect();
    stripped.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TagVocabulary {
    names: Vec<String>,
    standard: usize,
}

impl TagVocabulary {
    pub fn standard() -> TagVocabulary {
        TagVocabulary { names: STANDARD_TAGS.iter().map(|s| s.to_string()).collect(), standard: STANDARD_TAGS.len() }
    }

    /// Adds a free-form tag unless an equivalent one exists.
    pub fn extend(&mut self, name: &str) {
        if self.resolve(name).is_none() {
            self.names.push(name.to_string());
        }
    }

    /// Canonical name of a tag, matched on [`normalize_tag`].
    pub fn resolve(&self, tag: &str) -> Option<String> {
        let key = normalize_tag(tag);
        self.names.iter().find(|n| normalize_tag(n) == key).cloned()
    }

    /// 1-based importance rank of a standard tag.
    pub fn rank(&self, tag: &str) -> Option<usize> {
        let name = self.resolve(tag)?;
        self.names[..self.standard].iter().position(|n| *n == name).map(|i| i + 1)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn extensions(&self) -> &[String] {
        &self.names[self.standard..]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lookup() {
        let mut v = TagVocabulary::standard();
        assert_eq!(v.resolve("``When'' expression").as_deref(), Some("When expression"));
        assert_eq!(v.resolve("\u{201C}Try-catch\u{201D} expressions").as_deref(), Some("Try-catch expressions"));
        assert_eq!(v.rank("delegates"), Some(1));
        assert_eq!(v.rank("Type casts"), Some(30));
        assert_eq!(v.resolve("Generics"), None);
        v.extend("Generics");
        v.extend("generics");
        assert_eq!(v.extensions(), ["Generics"]);
        assert_eq!(v.rank("Generics"), None);
    }

    #[test]
    fn standard_names_are_distinct() {
        let mut keys: Vec<String> = STANDARD_TAGS.iter().map(|t| normalize_tag(t)).collect();
        keys.sort();
        keys.dedup();
        assert_eq!(keys.len(), 30);
    }
}
