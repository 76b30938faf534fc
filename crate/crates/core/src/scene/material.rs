//! Electromagnetic material definitions.

use std::collections::BTreeMap;

use thiserror::Error;

/// Surface material: relative permittivity and conductivity, the two
/// quantities the reflection model needs.
#[derive(Debug, Clone, PartialEq)]
pub struct Material {
    pub name: String,
    /// Relative permittivity ε_r (≥ 1).
    pub eps_r: f64,
    /// Conductivity σ in S/m (≥ 0).
    pub sigma: f64,
}

impl Material {
    pub fn new(name: &str, eps_r: f64, sigma: f64) -> Self {
        debug_assert!(eps_r >= 1.0 && sigma >= 0.0);
        Self {
            name: name.to_string(),
            eps_r,
            sigma,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("material `{0}` not in the library")]
pub struct UnknownMaterial(pub String);

/// Name-keyed material collection. Iteration order is alphabetical so any
/// derived output is deterministic.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MaterialLibrary {
    materials: BTreeMap<String, Material>,
}

impl MaterialLibrary {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Stock library with condition-dependent ground variants. Values are
    /// configurable defaults for the 3-4 GHz band.
    pub fn standard() -> Self {
        let mut lib = Self::empty();
        for m in [
            Material::new("concrete", 5.24, 0.123),
            Material::new("glass", 6.27, 0.034),
            Material::new("medium_dry_ground", 15.0, 0.035),
            Material::new("wet_ground", 30.0, 0.15),
            Material::new("metal", 1.0, 1e7),
            // Perfect absorber: unit permittivity, no conductivity, so the
            // reflection coefficient is exactly zero. Useful for isolating
            // individual propagation mechanisms in studies.
            Material::new("absorber", 1.0, 0.0),
        ] {
            lib.insert(m);
        }
        lib
    }

    pub fn insert(&mut self, material: Material) {
        self.materials.insert(material.name.clone(), material);
    }

    pub fn get(&self, name: &str) -> Result<&Material, UnknownMaterial> {
        self.materials
            .get(name)
            .ok_or_else(|| UnknownMaterial(name.to_string()))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.materials.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.materials.keys().map(String::as_str)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_library_has_the_stock_materials() {
        let lib = MaterialLibrary::standard();
        let concrete = lib.get("concrete").unwrap();
        assert_eq!(concrete.eps_r, 5.24);
        assert_eq!(concrete.sigma, 0.123);
        assert_eq!(lib.get("wet_ground").unwrap().eps_r, 30.0);
        assert!(lib.contains("metal"));
    }

    #[test]
    fn unknown_material_is_an_error() {
        let lib = MaterialLibrary::standard();
        assert_eq!(
            lib.get("unobtanium").unwrap_err(),
            UnknownMaterial("unobtanium".into())
        );
    }

    #[test]
    fn insert_overrides_by_name() {
        let mut lib = MaterialLibrary::standard();
        lib.insert(Material::new("concrete", 6.0, 0.2));
        assert_eq!(lib.get("concrete").unwrap().eps_r, 6.0);
    }
}
