use std::collections::HashMap;

/// Bijection between label strings as they appear in data files and the
/// contiguous class ids used internally.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LabelMap {
    names: Vec<String>,
    ids: HashMap<String, u32>,
}

impl LabelMap {
    pub fn new() -> Self {
        Self::default()
    }

    /// Class ids follow the order of `names`. Duplicates are skipped.
    pub fn from_names<I, S>(names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut map = LabelMap::new();
        for n in names {
            map.id_or_insert(&n.into());
        }
        map
    }

    /// Identity vocabulary `"0"`, `"1"`, ... used by the dense format.
    pub fn identity(n_classes: u32) -> Self {
        Self::from_names((0..n_classes).map(|c| c.to_string()))
    }

    /// Sorts numerically when every label parses as a number, otherwise lexically.
    pub fn sorted<S: AsRef<str>>(labels: &[S]) -> Self {
        let mut names: Vec<&str> = labels.iter().map(|s| s.as_ref()).collect();
        let numeric: Option<Vec<f64>> = names.iter().map(|s| s.parse::<f64>().ok()).collect();
        match numeric {
            Some(_) => names.sort_by(|a, b| {
                let (x, y) = (a.parse::<f64>().unwrap(), b.parse::<f64>().unwrap());
                x.total_cmp(&y).then_with(|| a.cmp(b))
            }),
            None => names.sort(),
        }
        Self::from_names(names)
    }

    pub fn id_or_insert(&mut self, name: &str) -> u32 {
        if let Some(&id) = self.ids.get(name) {
            return id;
        }
        let id = self.names.len() as u32;
        self.names.push(name.to_owned());
        self.ids.insert(name.to_owned(), id);
        id
    }

    pub fn id(&self, name: &str) -> Option<u32> {
        self.ids.get(name).copied()
    }

    pub fn name(&self, id: u32) -> Option<&str> {
        self.names.get(id as usize).map(|s| s.as_str())
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numeric_labels_sort_by_value() {
        let m = LabelMap::sorted(&["10", "2", "-1", "3"]);
        assert_eq!(m.names(), &["-1", "2", "3", "10"]);
        assert_eq!(m.id("10"), Some(3));
        let m = LabelMap::sorted(&["cat", "ant", "2"]);
        assert_eq!(m.names(), &["2", "ant", "cat"]);
    }

    #[test]
    fn insert_is_idempotent() {
        let mut m = LabelMap::identity(2);
        assert_eq!(m.id_or_insert("1"), 1);
        assert_eq!(m.id_or_insert("x"), 2);
        assert_eq!(m.name(2), Some("x"));
        assert_eq!(m.len(), 3);
    }
}
