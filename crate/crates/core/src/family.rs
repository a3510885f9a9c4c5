//! The eight eigenvalue-parameterized covariance structures.
//!
//! Every component covariance is written `Σ_g = D_g B_g D_gᵀ` where `B_g` is a
//! diagonal matrix of eigenvalues and `D_g` an orthonormal orientation. The
//! structures differ in whether the eigenvalues and the orientation are shared
//! across components, axis-aligned, or spherical.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{reconstruct, OrthMatrix, SymMatrix};

/// How the orientation matrices are parameterized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrientKind {
    Spherical,
    AxisAligned,
    Shared,
    Varying,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CovarianceStructure {
    /// λI
    OneI,
    /// λ_g I
    GI,
    /// diag(B)
    EI,
    /// diag(B_g)
    VI,
    /// D B Dᵀ
    EE,
    /// D_g B D_gᵀ
    EV,
    /// D_g B_g D_gᵀ
    VV,
    /// D B_g Dᵀ
    VE,
}

use CovarianceStructure::*;

impl CovarianceStructure {
    /// Column order used in BIC tables.
    pub const ALL: [CovarianceStructure; 8] = [EI, VI, EE, EV, VV, VE, GI, OneI];

    pub fn as_str(self) -> &'static str {
        match self {
            OneI => "1I",
            GI => "GI",
            EI => "EI",
            VI => "VI",
            EE => "EE",
            EV => "EV",
            VV => "VV",
            VE => "VE",
        }
    }

    /// Whether one eigenvalue set is shared by all components.
    pub fn shape_shared(self) -> bool {
        matches!(self, OneI | EI | EE | EV)
    }

    pub fn orient_kind(self) -> OrientKind {
        match self {
            OneI | GI => OrientKind::Spherical,
            EI | VI => OrientKind::AxisAligned,
            EE | VE => OrientKind::Shared,
            EV | VV => OrientKind::Varying,
        }
    }

    pub fn is_spherical(self) -> bool {
        self.orient_kind() == OrientKind::Spherical
    }

    /// Free covariance parameters.
    pub fn covariance_params(self, g: usize, p: usize) -> usize {
        let full = p * (p + 1) / 2;
        match self {
            OneI => 1,
            GI => g,
            EI => p,
            VI => p * g,
            EE => full,
            EV => g * full - (g - 1) * p,
            VV => g * full,
            VE => full + (g - 1) * p,
        }
    }

    /// Total free parameters: mixing weights, means and covariance.
    pub fn total_params(self, g: usize, p: usize) -> usize {
        (g - 1) + g * p + self.covariance_params(g, p)
    }

    /// Parses a comma-separated list; `all` expands to every structure.
    pub fn parse_list(s: &str) -> Result<Vec<Self>> {
        if s.trim().eq_ignore_ascii_case("all") {
            return Ok(Self::ALL.to_vec());
        }
        let mut out = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let tag: Self = part.parse()?;
            if !out.contains(&tag) {
                out.push(tag);
            }
        }
        if out.is_empty() {
            return Err(Error::Config("empty model list".into()));
        }
        Ok(out)
    }
}

impl fmt::Display for CovarianceStructure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CovarianceStructure {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "1I" => OneI,
            "GI" => GI,
            "EI" => EI,
            "VI" => VI,
            "EE" => EE,
            "EV" => EV,
            "VV" => VV,
            "VE" => VE,
            other => return Err(Error::UnknownStructure(other.to_string())),
        })
    }
}

impl Serialize for CovarianceStructure {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for CovarianceStructure {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Orientation {
    /// Axis-aligned or spherical: D = I, not stored.
    Identity,
    Shared(OrthMatrix),
    PerGroup(Vec<OrthMatrix>),
}

/// Eigenvalues and orientations for all G components of one structure.
///
/// Spherical structures keep one scalar per eigenvalue set; [`Self::eigvals`]
/// expands it to a p-vector.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceFactors {
    structure: CovarianceStructure,
    groups: usize,
    dim: usize,
    eigvals: Vec<Vec<f64>>,
    orients: Orientation,
}

impl CovarianceFactors {
    pub fn new(
        structure: CovarianceStructure,
        groups: usize,
        dim: usize,
        eigvals: Vec<Vec<f64>>,
        orients: Orientation,
    ) -> Result<Self> {
        let sets = if structure.shape_shared() { 1 } else { groups };
        if eigvals.len() != sets {
            return Err(Error::DimensionMismatch { expected: sets, found: eigvals.len() });
        }
        let width = if structure.is_spherical() { 1 } else { dim };
        for v in &eigvals {
            if v.len() != width {
                return Err(Error::DimensionMismatch { expected: width, found: v.len() });
            }
            if let Some(&bad) = v.iter().find(|x| !(**x > 0.0) || !x.is_finite()) {
                return Err(Error::Config(format!("eigenvalue {bad} is not strictly positive")));
            }
        }
        match (&orients, structure.orient_kind()) {
            (Orientation::Identity, OrientKind::Spherical | OrientKind::AxisAligned) => {}
            (Orientation::Shared(d), OrientKind::Shared) if d.dim() == dim => {}
            (Orientation::PerGroup(ds), OrientKind::Varying)
                if ds.len() == groups && ds.iter().all(|d| d.dim() == dim) => {}
            _ => {
                return Err(Error::Config(format!(
                    "orientation does not match structure {structure}"
                )))
            }
        }
        Ok(Self { structure, groups, dim, eigvals, orients })
    }

    pub fn structure(&self) -> CovarianceStructure {
        self.structure
    }

    pub fn groups(&self) -> usize {
        self.groups
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn orientation(&self) -> &Orientation {
        &self.orients
    }

    /// Raw stored eigenvalue sets (scalars for spherical structures).
    pub fn stored_eigvals(&self) -> &[Vec<f64>] {
        &self.eigvals
    }

    /// The p eigenvalues of component `g`.
    pub fn eigvals(&self, g: usize) -> Vec<f64> {
        let set = if self.structure.shape_shared() { &self.eigvals[0] } else { &self.eigvals[g] };
        if self.structure.is_spherical() {
            vec![set[0]; self.dim]
        } else {
            set.clone()
        }
    }

    /// Orientation of component `g`, `None` meaning the identity.
    pub fn orient(&self, g: usize) -> Option<&OrthMatrix> {
        match &self.orients {
            Orientation::Identity => None,
            Orientation::Shared(d) => Some(d),
            Orientation::PerGroup(ds) => Some(&ds[g]),
        }
    }

    pub fn assemble_sigma(&self, g: usize) -> SymMatrix {
        assert!(g < self.groups, "component {g} out of range (G = {})", self.groups);
        let b = self.eigvals(g);
        match self.orient(g) {
            None => SymMatrix::diag(&b),
            Some(d) => reconstruct(d, &b),
        }
    }

    pub fn min_max_eigval(&self) -> (f64, f64) {
        self.eigvals.iter().flatten().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        })
    }
}
