//! Inclusive `start:step:stop` rate grids.

use crate::error::CliError;

/// Relative slack allowed when checking that `stop` lies on the grid.
const ON_GRID_TOL: f64 = 1e-9;

/// Upper bound on the number of grid points.
pub const MAX_POINTS: usize = 100_000;

/// Parses `start:step:stop` (inclusive) or a single value.
///
/// Points are `start + i * step`; the last one is `stop` exactly. Grids
/// whose `stop` is not reached by an integer number of steps are rejected.
pub fn parse_grid(text: &str) -> Result<Vec<f64>, CliError> {
    let bad = |reason: String| CliError::Grid { text: text.to_string(), reason };
    let parts: Vec<&str> = text.trim().split(':').collect();
    let nums = parts
        .iter()
        .map(|p| p.trim().parse::<f64>().map_err(|e| bad(format!("{p:?}: {e}"))))
        .collect::<Result<Vec<f64>, CliError>>()?;
    if nums.iter().any(|v| !v.is_finite()) {
        return Err(bad("values must be finite".into()));
    }
    match nums[..] {
        [v] => Ok(vec![v]),
        [start, step, stop] => {
            if step <= 0.0 {
                return Err(bad("step must be positive".into()));
            }
            if stop < start {
                return Err(bad("stop is below start".into()));
            }
            let steps = (stop - start) / step;
            let whole = steps.round();
            if (steps - whole).abs() > ON_GRID_TOL * whole.max(1.0) {
                return Err(bad(format!("stop is not start plus a whole number of steps ({steps} steps)")));
            }
            let count = whole as usize + 1;
            if count > MAX_POINTS {
                return Err(bad(format!("{count} points exceeds the limit of {MAX_POINTS}")));
            }
            Ok((0..count).map(|i| if i + 1 == count { stop } else { start + i as f64 * step }).collect())
        }
        _ => Err(bad("expected start:step:stop or a single value".into())),
    }
}

/// Parses a comma-separated list of numbers.
pub fn parse_list<T: std::str::FromStr>(field: &'static str, text: &str) -> Result<Vec<T>, CliError>
where
    T::Err: std::fmt::Display,
{
    text.split(',')
        .map(|p| {
            p.trim().parse::<T>().map_err(|e| CliError::Usage(format!("{field}: {p:?}: {e}")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inclusive_grid() {
        let g = parse_grid("0.02:0.02:0.1").unwrap();
        assert_eq!(g.len(), 5);
        assert_eq!(g[0], 0.02);
        assert_eq!(g[4], 0.1);
        assert!((g[2] - 0.06).abs() < 1e-15);
        assert_eq!(parse_grid("0.3").unwrap(), vec![0.3]);
        assert_eq!(parse_grid("0.1:0.05:0.1").unwrap(), vec![0.1]);
    }

    #[test]
    fn malformed_grids() {
        for t in ["", "0.1:0.2", "0.1:0:0.5", "0.1:-0.1:0.5", "0.5:0.1:0.1", "0.1:0.03:0.2", "a:0.1:1", "0:1e-9:1", "0.1:0.1:inf", "1:2:3:4"] {
            assert!(matches!(parse_grid(t), Err(CliError::Grid { .. })), "{t}");
        }
    }

    #[test]
    fn lists() {
        assert_eq!(parse_list::<u32>("comp", "3, 5").unwrap(), vec![3, 5]);
        assert!(parse_list::<u32>("comp", "3,x").is_err());
    }
}
