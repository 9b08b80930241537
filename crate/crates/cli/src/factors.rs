//! Resolves factor labels from a config against a family.

use infer_core::families::Pin;
use infer_core::numerics::MonotoneCubic;
use infer_core::posterior::{consistency_factor, ConsistencyFactor, Coordinate, FactorKind};
use infer_core::rivals::{jeffreys_factor, uniform_factor, PriorRule};
use infer_core::{Error, Family, Result};

/// `θ₁:ζ₁,θ₂:ζ₂,...` with increasing `θ` and positive `ζ`.
pub fn parse_table(table: &str) -> Result<Vec<(f64, f64)>, String> {
    let mut rows = Vec::new();
    for item in table.split(',') {
        let (t, z) = item
            .split_once(':')
            .ok_or_else(|| format!("table entry '{item}' is not '<theta>:<zeta>'"))?;
        let t: f64 = t
            .trim()
            .parse()
            .map_err(|_| format!("'{t}' is not a number"))?;
        let z: f64 = z
            .trim()
            .parse()
            .map_err(|_| format!("'{z}' is not a number"))?;
        if !(z > 0.0) || !z.is_finite() || !t.is_finite() {
            return Err(format!("entry '{item}': need finite theta and zeta > 0"));
        }
        rows.push((t, z));
    }
    if rows.len() < 2 {
        return Err("a custom table needs at least two entries".to_string());
    }
    if rows.windows(2).any(|w| !(w[0].0 < w[1].0)) {
        return Err("custom table thetas must be strictly increasing".to_string());
    }
    Ok(rows)
}

/// `ln ζ` interpolated monotonically in the working coordinate of the
/// parameter space and extended linearly.
fn table_factor(label: &str, rows: Vec<(f64, f64)>, fam: &Family) -> Result<ConsistencyFactor> {
    if fam.dim() != 1 {
        return Err(Error::InvalidArgument(
            "custom table factors need a one-parameter family".to_string(),
        ));
    }
    let space = fam.param_space()[0];
    if let Some((t, _)) = rows.iter().find(|(t, _)| !space.interior(*t)) {
        return Err(Error::InvalidArgument(format!(
            "custom table theta {t} is outside the parameter space"
        )));
    }
    let coord = Coordinate::for_domain(space);
    let (ws, lz): (Vec<f64>, Vec<f64>) = rows.iter().map(|&(t, z)| (coord.w(t), z.ln())).unzip();
    let interp = MonotoneCubic::new(ws, lz);
    Ok(ConsistencyFactor::custom_ln(label, move |t| {
        interp.eval(coord.w(t[0]))
    }))
}

pub fn resolve(label: &str, fam: &Family) -> Result<ConsistencyFactor> {
    if let Some(p) = label.strip_prefix("sigma^-") {
        let p: f64 = p
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("bad factor '{label}'")))?;
        return Ok(ConsistencyFactor::scale_power(p));
    }
    if let Some(table) = label.strip_prefix("custom:") {
        let rows = parse_table(table).map_err(Error::InvalidArgument)?;
        return table_factor(label, rows, fam);
    }
    match label {
        "consistency" => {
            let kind = match fam.as_location_scale().map(|l| l.pin()) {
                Some(Pin::Scale(_)) => FactorKind::Location,
                Some(Pin::Location(_)) => FactorKind::Scale,
                Some(Pin::Joint) => FactorKind::JointLocationScale,
                None => {
                    return Err(Error::InvalidArgument(format!(
                        "no built-in consistency factor for '{}'",
                        fam.label()
                    )))
                }
            };
            consistency_factor(kind)
        }
        "location" => consistency_factor(FactorKind::Location),
        "scale" => consistency_factor(FactorKind::Scale),
        "joint" => consistency_factor(FactorKind::JointLocationScale),
        "uniform" => Ok(uniform_factor()),
        "jeffreys" => jeffreys_factor(fam),
        "reference" => {
            if fam.dim() != 2 {
                return Err(Error::InvalidArgument(
                    "the reference factor is defined on (μ, σ)".to_string(),
                ));
            }
            PriorRule::Reference.joint_factor(fam)
        }
        _ => Err(Error::InvalidArgument(format!("unknown factor '{label}'"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use infer_core::families::lookup;

    #[test]
    fn consistency_follows_the_pin() {
        let f = lookup("exponential-scale").unwrap();
        assert_eq!(
            resolve("consistency", &f).unwrap().kind(),
            FactorKind::Scale
        );
        let f = lookup("cauchy-location").unwrap();
        assert_eq!(
            resolve("consistency", &f).unwrap().kind(),
            FactorKind::Location
        );
        let f = lookup("normal").unwrap();
        assert_eq!(
            resolve("consistency", &f).unwrap().kind(),
            FactorKind::JointLocationScale
        );
    }

    #[test]
    fn table_factor_reproduces_a_power_law() {
        let f = lookup("exponential-scale").unwrap();
        let z = resolve("custom:0.5:2,1:1,2:0.5,4:0.25", &f).unwrap();
        for s in [0.3, 0.7, 1.5, 3.0, 8.0] {
            assert!((z.zeta(&[s]) - 1.0 / s).abs() < 1e-12 / s.min(1.0));
        }
        assert!(resolve("custom:-1:1,1:1", &f).is_err());
    }

    #[test]
    fn sigma_power() {
        let f = lookup("normal").unwrap();
        let z = resolve("sigma^-2", &f).unwrap();
        assert!((z.zeta(&[0.0, 2.0]) - 0.25).abs() < 1e-15);
    }
}
