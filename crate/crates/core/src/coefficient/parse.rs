use std::sync::Arc;

use super::{CoefficientField, Perturbation, Perturbed, RandomSmooth};
use crate::error::{LabError, Result};

fn num(spec: &str, s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| LabError::parse(spec, format!("`{s}` is not a number")))
}

fn list(spec: &str, s: &str) -> Result<Vec<f64>> {
    s.split(',').map(|v| num(spec, v)).collect()
}

fn parse_modulus(spec: &str, s: &str) -> Result<Perturbation> {
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        ["holder", eps, beta] => Ok(Perturbation::Holder {
            eps: num(spec, eps)?,
            beta: num(spec, beta)?,
        }),
        ["log", eps] => Ok(Perturbation::LogDini { eps: num(spec, eps)? }),
        ["offset", eps] => Ok(Perturbation::Offset { eps: num(spec, eps)? }),
        ["offset1", eps] => Ok(Perturbation::OffsetFirst { eps: num(spec, eps)? }),
        _ => Err(LabError::parse(
            spec,
            "modulus must be holder:eps:beta, log:eps, offset:eps or offset1:eps",
        )),
    }
}

/// Builds a coefficient field on the unit ball of ℝ^dim from its identifier.
///
/// Accepted forms: `identity`, `scalar:c`, `diag:d1,..,dn`, `convex_graph:a1,..,an`,
/// `cone2d:theta`, `random:seed` and `perturbed:<base>,<modulus>`.
pub fn parse_coefficient(spec: &str, dim: usize) -> Result<CoefficientField> {
    let spec = spec.trim();
    let (head, rest) = spec.split_once(':').unwrap_or((spec, ""));
    let field = match head {
        "identity" if rest.is_empty() => CoefficientField::identity(dim),
        "scalar" => CoefficientField::scalar(dim, num(spec, rest)?)?,
        "diag" => CoefficientField::diagonal(&list(spec, rest)?)?,
        "convex_graph" => CoefficientField::convex_graph(&list(spec, rest)?)?,
        "cone2d" => CoefficientField::planar_cone(num(spec, rest)?)?,
        "random" => {
            let seed = rest
                .trim()
                .parse::<u64>()
                .map_err(|_| LabError::parse(spec, "seed must be an unsigned integer"))?;
            CoefficientField::from_model(RandomSmooth::new(dim, seed), 1.0)?
        }
        "perturbed" => {
            let (base, modulus) = rest
                .rsplit_once(',')
                .ok_or_else(|| LabError::parse(spec, "expected perturbed:<base>,<modulus>"))?;
            let base = parse_coefficient(base, dim)?;
            CoefficientField::new(
                Arc::new(Perturbed {
                    base: base.model().clone(),
                    kind: parse_modulus(spec, modulus)?,
                }),
                1.0,
            )?
        }
        _ => return Err(LabError::parse(spec, format!("unknown coefficient family `{head}`"))),
    };
    if field.dim() != dim {
        return Err(LabError::parse(
            spec,
            format!("field has dimension {} but the geometry has {dim}", field.dim()),
        ));
    }
    Ok(field)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_families() {
        assert_eq!(parse_coefficient("identity", 3).unwrap().describe(), "identity");
        assert_eq!(parse_coefficient("scalar:2", 3).unwrap().ellipticity(), (2.0, 2.0));
        let p = parse_coefficient("perturbed:convex_graph:1,1,1,holder:0.2:0.5", 3).unwrap();
        assert_eq!(p.describe(), "perturbed:convex_graph:1,1,1,holder:0.2:0.5");
        assert!(p.singular_at_origin());
        assert!(parse_coefficient("cone2d:3.14159", 2).is_ok());
    }

    #[test]
    fn reports_bad_input() {
        assert!(matches!(parse_coefficient("wobbly", 3), Err(LabError::Parse { .. })));
        assert!(parse_coefficient("convex_graph:1,1", 3).is_err());
        assert!(parse_coefficient("convex_graph:1,1,1", 4).is_err());
        assert!(parse_coefficient("perturbed:identity,holder:x:1", 3).is_err());
    }
}
