//! Name-keyed registries of strategy objects (norm estimators, verify
//! suites, example geometries).

use crate::error::{Error, Result};

pub trait Named {
    fn name(&self) -> &str;
}

pub struct Registry<T: ?Sized + Named> {
    items: Vec<Box<T>>,
}

impl<T: ?Sized + Named> Default for Registry<T> {
    fn default() -> Self {
        Registry { items: Vec::new() }
    }
}

impl<T: ?Sized + Named> Registry<T> {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds an entry; names must be unique.
    pub fn register(&mut self, item: Box<T>) -> Result<()> {
        if self.items.iter().any(|i| i.name() == item.name()) {
            return Err(Error::InvalidArgument(format!(
                "duplicate registry name {}",
                item.name()
            )));
        }
        self.items.push(item);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&T> {
        self.items
            .iter()
            .find(|i| i.name() == name)
            .map(|b| b.as_ref())
            .ok_or_else(|| {
                Error::UnknownName(format!(
                    "{name} (known: {})",
                    self.names().join(", ")
                ))
            })
    }

    pub fn names(&self) -> Vec<&str> {
        self.items.iter().map(|i| i.name()).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &T> {
        self.items.iter().map(|b| b.as_ref())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Item(&'static str);
    impl Named for Item {
        fn name(&self) -> &str {
            self.0
        }
    }

    #[test]
    fn lookup_and_duplicates() {
        let mut r: Registry<Item> = Registry::new();
        r.register(Box::new(Item("a"))).unwrap();
        r.register(Box::new(Item("b"))).unwrap();
        assert!(r.register(Box::new(Item("a"))).is_err());
        assert_eq!(r.get("b").unwrap().0, "b");
        assert!(matches!(r.get("c"), Err(Error::UnknownName(_))));
        assert_eq!(r.names(), vec!["a", "b"]);
    }
}
