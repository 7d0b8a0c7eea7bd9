//! JSON documents. Rationals are `"p/q"` strings throughout.

use crate::affine::AffineFunction;
use crate::fibration::{bundle_problem, BundleProblem, FiberError};
use crate::pl::PLConvexFunction;
use crate::poly::Polynomial;
use crate::polytope::{LabeledPolytope, PolytopeError};
use crate::rational::{serde_rational, Rational};
use crate::weights::{BundleSpec, WeightExpr};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Serialize, Deserialize)]
struct PolytopeJson {
    dim: usize,
    labels: Vec<AffineFunction>,
}

impl Serialize for LabeledPolytope {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        PolytopeJson {
            dim: self.dim(),
            labels: self.labels().to_vec(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for LabeledPolytope {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let raw = PolytopeJson::deserialize(d)?;
        if raw.labels.iter().any(|l| l.dim() != raw.dim) {
            return Err(D::Error::custom("label dimension differs from dim"));
        }
        LabeledPolytope::new(raw.labels).map_err(D::Error::custom)
    }
}

/// A polytope given in full or as `{"standard_simplex": dim}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PolytopeRef {
    StandardSimplex { standard_simplex: usize },
    Explicit(LabeledPolytope),
}

impl PolytopeRef {
    pub fn resolve(&self) -> LabeledPolytope {
        match self {
            PolytopeRef::StandardSimplex { standard_simplex } => LabeledPolytope::standard_simplex(*standard_simplex),
            PolytopeRef::Explicit(p) => p.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RationalJson(#[serde(with = "serde_rational")] pub Rational);

/// Input document shared by the command-line subcommands; each one reads
/// the fields it needs.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemInput {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bundle: Option<BundleSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub polytope: Option<PolytopeRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density: Option<Polynomial>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<Polynomial>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f: Option<PLConvexFunction>,
    #[serde(default, rename = "R", skip_serializing_if = "Option::is_none")]
    pub r: Option<RationalJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ranks: Option<Vec<u32>>,
    /// Polynomial parts `φ` of potentials `u₀ + φ`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potentials: Option<Vec<Polynomial>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_values: Option<Vec<RationalJson>>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InputError {
    #[error("missing field {0:?}")]
    Missing(&'static str),
    #[error("{0}")]
    Dimension(String),
    #[error(transparent)]
    Polytope(#[from] PolytopeError),
    #[error(transparent)]
    Fiber(#[from] FiberError),
}

/// `(P, v, w)` for the functionals, either given directly or assembled
/// from a bundle as `(Δ, pp̄, w̄)`.
#[derive(Clone, Debug)]
pub struct ToricProblem {
    pub polytope: LabeledPolytope,
    pub density: Polynomial,
    pub weight: WeightExpr,
    pub bundle: Option<Box<BundleProblem>>,
}

impl ProblemInput {
    pub fn parse(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn require_f(&self) -> Result<&PLConvexFunction, InputError> {
        self.f.as_ref().ok_or(InputError::Missing("f"))
    }

    pub fn require_bundle(&self) -> Result<&BundleSpec, InputError> {
        self.bundle.as_ref().ok_or(InputError::Missing("bundle"))
    }

    pub fn polytope(&self) -> Option<LabeledPolytope> {
        self.polytope.as_ref().map(PolytopeRef::resolve)
    }

    pub fn toric_problem(&self) -> Result<ToricProblem, InputError> {
        if let Some(spec) = &self.bundle {
            let problem = bundle_problem(spec)?;
            return Ok(ToricProblem {
                polytope: problem.delta().clone(),
                density: problem.density().clone(),
                weight: problem.w_bar().clone(),
                bundle: Some(Box::new(problem)),
            });
        }
        let polytope = self.polytope().ok_or(InputError::Missing("polytope"))?;
        let n = polytope.dim();
        let density = self.density.clone().unwrap_or_else(|| Polynomial::one(n));
        let weight = self.weight.clone().ok_or(InputError::Missing("weight"))?;
        for (name, q) in [("density", &density), ("weight", &weight)] {
            if q.dim() != n {
                return Err(InputError::Dimension(format!("{name} has dimension {}, polytope {n}", q.dim())));
            }
        }
        Ok(ToricProblem {
            polytope,
            density,
            weight: WeightExpr::polynomial(weight),
            bundle: None,
        })
    }
}
