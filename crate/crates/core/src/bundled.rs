//! Example metrics shipped with the toolkit.

use crate::error::{Error, Result};
use crate::metric::MetricSpec;

const SPECS: [(&str, &str); 7] = [
    ("flat3", include_str!("../specs/flat3.json")),
    ("flat4", include_str!("../specs/flat4.json")),
    ("sphere3", include_str!("../specs/sphere3.json")),
    ("sphere4", include_str!("../specs/sphere4.json")),
    ("poly3", include_str!("../specs/poly3.json")),
    ("poly4", include_str!("../specs/poly4.json")),
    ("conformal4", include_str!("../specs/conformal4.json")),
];

pub fn names() -> Vec<&'static str> {
    SPECS.iter().map(|(n, _)| *n).collect()
}

pub fn source(name: &str) -> Option<&'static str> {
    SPECS.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

pub fn bundled(name: &str) -> Result<MetricSpec> {
    let text = source(name).ok_or_else(|| Error::InvalidSpec(format!("no bundled spec named `{name}`")))?;
    MetricSpec::from_json(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_bundled_specs_load() {
        for name in names() {
            let s = bundled(name).unwrap();
            assert_eq!(s.name(), name);
        }
        assert!(bundled("torus").is_err());
    }
}
