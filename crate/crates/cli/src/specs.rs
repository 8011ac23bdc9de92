//! Short textual specs for spaces, groups and coverings.

use std::path::Path;
use std::sync::Arc;

use coarsekit::coverings::{free_ball_size, load_quotient_json, quotient_covering, CoveringMap, MarkedGroupBall};
use coarsekit::coverings::MAX_BALL_POINTS;
use coarsekit::spaces::cayley::{cyclic, torus_group, CayleySpace};
use coarsekit::spaces::load_space_json;
use coarsekit::{Dist, FiniteSpace};

use crate::cli::{CoverInput, SpaceInput};
use crate::error::{ensure, CliError, CliResult};

pub fn read_file(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))
}

fn number<T: std::str::FromStr>(spec: &str, text: &str) -> CliResult<T> {
    text.parse()
        .map_err(|_| CliError::Config(format!("'{spec}': '{text}' is not a valid number")))
}

/// `cyclic:N`, `torus:N`, or a quotient JSON file.
pub fn group(spec: &str) -> CliResult<CayleySpace> {
    match spec.split_once(':') {
        Some(("cyclic", n)) => {
            let n: u64 = number(spec, n)?;
            ensure(n >= 1, || format!("'{spec}': order must be positive"))?;
            Ok(cyclic(n)?)
        }
        Some(("torus", n)) => {
            let n: u64 = number(spec, n)?;
            ensure(n >= 1, || format!("'{spec}': order must be positive"))?;
            Ok(torus_group(n)?)
        }
        _ if spec.ends_with(".json") => Ok(load_quotient_json(&read_file(Path::new(spec))?)?),
        _ => Err(CliError::Config(format!("unknown group spec '{spec}'"))),
    }
}

/// `cycle:N`, `path:N`, `grid:AxB`, or any group spec (its Cayley graph).
pub fn space(input: &SpaceInput) -> CliResult<Arc<FiniteSpace>> {
    if let Some(path) = &input.input {
        return Ok(Arc::new(load_space_json(&read_file(path)?)?));
    }
    let spec = input.space.as_deref().expect("clap requires one of the two");
    let positive = |n: usize| ensure(n >= 1, || format!("'{spec}': size must be positive"));
    let s = match spec.split_once(':') {
        Some(("cycle", n)) => {
            let n: usize = number(spec, n)?;
            positive(n)?;
            FiniteSpace::cycle(n)
        }
        Some(("path", n)) => {
            let n: usize = number(spec, n)?;
            positive(n)?;
            FiniteSpace::path(n)
        }
        Some(("grid", dims)) => {
            let (a, b) = dims
                .split_once('x')
                .ok_or_else(|| CliError::Config(format!("'{spec}': expected grid:AxB")))?;
            let (a, b): (usize, usize) = (number(spec, a)?, number(spec, b)?);
            positive(a.min(b))?;
            FiniteSpace::torus(a, b)
        }
        _ => return Ok(group(spec)?.arc_space()),
    };
    Ok(Arc::new(s))
}

/// Rank of the free source: `z` is rank 1, `free:K` rank `K`.
pub fn source_rank(spec: &str) -> CliResult<usize> {
    match spec.split_once(':') {
        None if spec == "z" => Ok(1),
        Some(("free", k)) => {
            let k: usize = number(spec, k)?;
            ensure((1..=8).contains(&k), || format!("'{spec}': rank must be 1..=8"))?;
            Ok(k)
        }
        _ => Err(CliError::Config(format!("unknown source spec '{spec}' (use z or free:K)"))),
    }
}

/// Twice the quotient's diameter, reduced until the ball fits the point cap
/// (but never below the diameter, which surjectivity needs).
fn default_ball(rank: usize, diameter: Dist) -> Dist {
    let mut r = (2 * diameter).max(1);
    while r > diameter.max(1) && free_ball_size(rank, r) > MAX_BALL_POINTS {
        r -= 1;
    }
    r
}

pub fn covering_family(source: &str, targets: &[String], ball: Option<Dist>) -> CliResult<Vec<CoveringMap>> {
    let rank = source_rank(source)?;
    let quotients: Vec<Arc<CayleySpace>> = targets.iter().map(|t| group(t).map(Arc::new)).collect::<CliResult<_>>()?;
    let diam = quotients.iter().map(|q| q.arc_space().diameter()).max().unwrap_or(0);
    let radius = ball.unwrap_or_else(|| default_ball(rank, diam));
    let ball = Arc::new(MarkedGroupBall::new(rank, radius)?);
    quotients
        .iter()
        .map(|q| quotient_covering(&ball, q).map_err(CliError::from))
        .collect()
}

pub fn covering(input: &CoverInput) -> CliResult<CoveringMap> {
    let mut family = covering_family(&input.source, std::slice::from_ref(&input.target), input.ball)?;
    Ok(family.remove(0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn specs_parse() {
        assert_eq!(group("cyclic:12").unwrap().order(), 12);
        assert_eq!(group("torus:3").unwrap().order(), 9);
        assert!(matches!(group("cyclic:x"), Err(CliError::Config(_))));
        assert!(matches!(group("klein"), Err(CliError::Config(_))));
        assert_eq!(source_rank("z").unwrap(), 1);
        assert_eq!(source_rank("free:2").unwrap(), 2);
        assert!(source_rank("free:0").is_err());
        let s = space(&SpaceInput {
            input: None,
            space: Some("grid:3x4".into()),
        })
        .unwrap();
        assert_eq!(s.len(), 12);
    }

    #[test]
    fn default_ball_fits_cap() {
        assert_eq!(default_ball(1, 6), 12);
        let r = default_ball(2, 4);
        assert!(r >= 4 && free_ball_size(2, r) <= MAX_BALL_POINTS);
    }
}
