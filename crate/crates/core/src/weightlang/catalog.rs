use serde::Serialize;

use super::{parse, ParamBinding, WeightExpr};
use crate::error::CatalogError;
use crate::grid::RadialDomain;

/// First positive zero of the Bessel function `J_0`.
pub const BESSEL_J0_FIRST_ZERO: f64 = 2.404_825_557_695_773;

/// Which dimension the pair is a Bessel pair in, relative to `N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PairDim {
    N,
    NPlus2,
}

#[derive(Debug, Clone, Copy)]
struct Entry {
    name: &'static str,
    v: &'static str,
    w: &'static str,
    dim: PairDim,
    ball: bool,
    needs_b: Option<fn(f64) -> bool>,
    about: &'static str,
}

const ENTRIES: &[Entry] = &[
    Entry {
        name: "hardy",
        v: "1",
        w: "(N-2)^2/(4*r^2)",
        dim: PairDim::N,
        ball: false,
        needs_b: None,
        about: "classical Hardy pair",
    },
    Entry {
        name: "hardy_rellich",
        v: "1",
        w: "N^2/(4*r^2)",
        dim: PairDim::NPlus2,
        ball: false,
        needs_b: None,
        about: "Hardy-Rellich pair, constant N^2/4",
    },
    Entry {
        name: "hr_ball_boundary",
        v: "1",
        w: "N^2/4*(1/(r^2*(1-(R/r)^(-N))^2))",
        dim: PairDim::NPlus2,
        ball: true,
        needs_b: None,
        about: "Hardy-Rellich on a ball with boundary-distance weight",
    },
    Entry {
        name: "hr_brezis_vazquez",
        v: "1",
        w: "N^2/(4*r^2)+2.404825557695773^2/R^2",
        dim: PairDim::NPlus2,
        ball: true,
        needs_b: None,
        about: "Hardy-Rellich with Brezis-Vazquez remainder z0^2/R^2",
    },
    Entry {
        name: "heisenberg2",
        v: "1",
        w: "N+2-r^2",
        dim: PairDim::NPlus2,
        ball: false,
        needs_b: None,
        about: "second order Heisenberg uncertainty weight",
    },
    Entry {
        name: "hydrogen2",
        v: "1",
        w: "(N+1)/r-1",
        dim: PairDim::NPlus2,
        ball: false,
        needs_b: None,
        about: "second order hydrogen uncertainty weight",
    },
    Entry {
        name: "ckn_blt1",
        v: "1",
        w: "(N+1-b)/r^(b+1)-1/r^(2*b)",
        dim: PairDim::NPlus2,
        ball: false,
        needs_b: Some(|b| b < 1.0),
        about: "Caffarelli-Kohn-Nirenberg weight, b < 1",
    },
    Entry {
        name: "ckn_bgt1",
        v: "1",
        w: "(N+b-1)/r^(b+1)-1/r^(2*b)",
        dim: PairDim::NPlus2,
        ball: false,
        needs_b: Some(|b| b > 1.0),
        about: "Caffarelli-Kohn-Nirenberg weight, b > 1",
    },
    Entry {
        name: "rellich",
        v: "1",
        w: "N^2*(N-4)^2/(16*r^4)",
        dim: PairDim::N,
        ball: false,
        needs_b: None,
        about: "Rellich weight (pairs with |u|^2, not a Bessel pair)",
    },
];

/// A catalog pair with its Bessel dimension and domain resolved.
#[derive(Debug, Clone, Serialize)]
pub struct CatalogPair {
    pub name: &'static str,
    pub v: WeightExpr,
    pub w: WeightExpr,
    pub dim: u32,
    pub dim_kind: PairDim,
    pub domain: RadialDomain,
    pub binding: ParamBinding,
    pub about: &'static str,
}

/// Names of all catalog entries.
pub fn catalog_names() -> Vec<&'static str> {
    ENTRIES.iter().map(|e| e.name).collect()
}

/// Short description of an entry.
pub fn catalog_about(name: &str) -> Option<&'static str> {
    ENTRIES.iter().find(|e| e.name == name).map(|e| e.about)
}

/// Looks up a pair used in the corollaries. `binding.n` is required; ball
/// entries need `R`, the CKN entries need `b` on the right side of 1.
pub fn catalog(name: &str, binding: &ParamBinding) -> Result<CatalogPair, CatalogError> {
    let entry = ENTRIES
        .iter()
        .find(|e| e.name == name)
        .ok_or_else(|| CatalogError::UnknownName(name.to_string()))?;
    let n = binding.dim().ok_or(CatalogError::MissingParam { name: entry.name, param: "N" })?;
    if n < 1 {
        return Err(CatalogError::InvalidParam {
            name: entry.name,
            msg: "N must be >= 1".into(),
        });
    }
    let radius = if entry.ball {
        let r = binding
            .radius
            .ok_or(CatalogError::MissingParam { name: entry.name, param: "R" })?;
        if !(r > 0.0 && r.is_finite()) {
            return Err(CatalogError::InvalidParam {
                name: entry.name,
                msg: format!("R must be a finite positive radius, got {r}"),
            });
        }
        r
    } else {
        f64::INFINITY
    };
    if let Some(ok) = entry.needs_b {
        let b = binding.b.ok_or(CatalogError::MissingParam { name: entry.name, param: "b" })?;
        if !ok(b) {
            return Err(CatalogError::InvalidParam {
                name: entry.name,
                msg: format!("b = {b} is outside the admissible range"),
            });
        }
    }
    let dim = match entry.dim {
        PairDim::N => n,
        PairDim::NPlus2 => n + 2,
    };
    let mut bound = *binding;
    bound.radius = Some(radius);
    Ok(CatalogPair {
        name: entry.name,
        v: parse(entry.v).expect("catalog V parses"),
        w: parse(entry.w).expect("catalog W parses"),
        dim,
        dim_kind: entry.dim,
        domain: RadialDomain::new(n, radius).expect("validated"),
        binding: bound,
        about: entry.about,
    })
}
