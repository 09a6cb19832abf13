//! Probing trajectories: fitness prefixes of solver runs, their
//! concatenations across algorithms, and the shuffled/reordered variants
//! used by the invariance studies.

use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng::derived_rng;
use crate::solvers::{Algorithm, RunLog};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Raw fitness of every evaluated point in evaluation order.
    Current,
    /// Running minimum of the current trajectory.
    Best,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Current => "current",
            Mode::Best => "best",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "current" => Ok(Mode::Current),
            "best" => Ok(Mode::Best),
            _ => Err(invalid(format!("unknown trajectory mode {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Part {
    pub algorithm: Algorithm,
    pub generations: usize,
    pub population_size: usize,
}

impl Part {
    pub fn len(&self) -> usize {
        self.generations * self.population_size
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Origin {
    pub function_id: u32,
    pub instance_id: u32,
    pub run_index: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub values: Vec<f64>,
    pub mode: Mode,
    pub parts: Vec<Part>,
    pub origin: Origin,
    pub label: Option<Algorithm>,
}

pub fn running_min(values: &[f64]) -> Vec<f64> {
    let mut best = f64::INFINITY;
    values
        .iter()
        .map(|&v| {
            if v < best {
                best = v;
            }
            best
        })
        .collect()
}

/// The first `generations` generations of `log`.
pub fn probe(log: &RunLog, generations: usize, mode: Mode) -> Result<Trajectory> {
    let pop = log.config.population_size;
    let available = log.complete_generations();
    if generations == 0 || available < generations {
        return Err(Error::InsufficientData(format!(
            "{} log has {available} complete generations, {generations} requested",
            log.config.algorithm
        )));
    }
    let current: Vec<f64> = log.records[..generations * pop].iter().map(|r| r.fitness).collect();
    let values = match mode {
        Mode::Current => current,
        Mode::Best => running_min(&current),
    };
    Ok(Trajectory {
        values,
        mode,
        parts: vec![Part { algorithm: log.config.algorithm, generations, population_size: pop }],
        origin: Origin {
            function_id: log.instance.function_id,
            instance_id: log.instance.instance_id,
            run_index: log.run_index,
        },
        label: None,
    })
}

/// Joins trajectories of the same run in the given order.
pub fn concat(parts: &[Trajectory]) -> Result<Trajectory> {
    let first = parts
        .first()
        .ok_or_else(|| Error::IncompatibleParts("nothing to concatenate".into()))?;
    if let Some(bad) = parts.iter().find(|t| t.mode != first.mode) {
        return Err(Error::IncompatibleParts(format!(
            "mixed modes {} and {}",
            first.mode, bad.mode
        )));
    }
    if parts.iter().any(|t| t.origin != first.origin) {
        return Err(Error::IncompatibleParts("parts come from different runs".into()));
    }
    Ok(Trajectory {
        values: parts.iter().flat_map(|t| t.values.iter().copied()).collect(),
        mode: first.mode,
        parts: parts.iter().flat_map(|t| t.parts.iter().copied()).collect(),
        origin: first.origin,
        label: first.label,
    })
}

impl Trajectory {
    /// Value range `[start, end)` of every part.
    fn part_spans(&self) -> Vec<(usize, usize)> {
        let mut start = 0;
        self.parts
            .iter()
            .map(|p| {
                let span = (start, start + p.len());
                start += p.len();
                span
            })
            .collect()
    }

    pub fn check_layout(&self) -> Result<()> {
        let expected: usize = self.parts.iter().map(Part::len).sum();
        if expected != self.values.len() {
            return Err(Error::Format(format!(
                "trajectory has {} values, parts describe {expected}",
                self.values.len()
            )));
        }
        Ok(())
    }

    /// Min–max scaling to `[0, 1]`; constant trajectories map to zeros.
    pub fn normalized(&self) -> Trajectory {
        let lo = self.values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let span = hi - lo;
        let values = self
            .values
            .iter()
            .map(|v| if span > 0.0 { (v - lo) / span } else { 0.0 })
            .collect();
        Trajectory { values, ..self.clone() }
    }

    /// Recomputes the best-so-far view independently for every part.
    pub fn to_best(&self) -> Result<Trajectory> {
        self.check_layout()?;
        let mut values = Vec::with_capacity(self.values.len());
        for (s, e) in self.part_spans() {
            values.extend(running_min(&self.values[s..e]));
        }
        Ok(Trajectory { values, mode: Mode::Best, ..self.clone() })
    }
}

/// Permutes every generation block of every part independently.
pub fn shuffle_within_generations(t: &Trajectory, seed: u64) -> Result<Trajectory> {
    if t.mode != Mode::Current {
        return Err(Error::InvalidMode(
            "only current trajectories can be shuffled; rebuild best from the shuffled current".into(),
        ));
    }
    t.check_layout()?;
    let mut rng = derived_rng(
        seed,
        &[t.origin.function_id as u64, t.origin.instance_id as u64, t.origin.run_index as u64],
    );
    let mut values = t.values.clone();
    for ((start, _), part) in t.part_spans().into_iter().zip(&t.parts) {
        for g in 0..part.generations {
            let block = &mut values[start + g * part.population_size..start + (g + 1) * part.population_size];
            for i in (1..block.len()).rev() {
                let j = rng.random_range(0..=i);
                block.swap(i, j);
            }
        }
    }
    Ok(Trajectory { values, ..t.clone() })
}

/// Rearranges parts so that new part `k` is old part `order[k]`.
pub fn reorder_parts(t: &Trajectory, order: &[usize]) -> Result<Trajectory> {
    let n = t.parts.len();
    let mut seen = vec![false; n];
    if order.len() != n || order.iter().any(|&i| i >= n || std::mem::replace(&mut seen[i], true)) {
        return Err(invalid(format!("{order:?} is not a permutation of {n} parts")));
    }
    t.check_layout()?;
    let spans = t.part_spans();
    let mut values = Vec::with_capacity(t.values.len());
    for &i in order {
        let (s, e) = spans[i];
        values.extend_from_slice(&t.values[s..e]);
    }
    Ok(Trajectory {
        values,
        parts: order.iter().map(|&i| t.parts[i]).collect(),
        ..t.clone()
    })
}

/// Ordered algorithm combination forming one selector input, written as
/// `C`, `D`, `P`, `C-P`, `C-D`, `D-P` or `ALL` (= `C-P-D`).
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Combination(pub Vec<Algorithm>);

impl Combination {
    pub fn all() -> Self {
        Combination(vec![Algorithm::Cmaes, Algorithm::Pso, Algorithm::De])
    }

    pub fn single(a: Algorithm) -> Self {
        Combination(vec![a])
    }

    /// Total trajectory length for the given population sizes.
    pub fn length(&self, generations: usize, population: impl Fn(Algorithm) -> usize) -> usize {
        self.0.iter().map(|&a| generations * population(a)).sum()
    }
}

impl fmt::Display for Combination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if *self == Combination::all() {
            return f.write_str("ALL");
        }
        let letters: Vec<String> = self.0.iter().map(|a| a.letter().to_string()).collect();
        f.write_str(&letters.join("-"))
    }
}

impl FromStr for Combination {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("ALL") {
            return Ok(Combination::all());
        }
        let algs = s
            .split('-')
            .map(|p| {
                let mut chars = p.chars();
                match (chars.next(), chars.next()) {
                    (Some(c), None) => Algorithm::from_letter(c.to_ascii_uppercase()),
                    _ => Err(invalid(format!("bad combination {s:?}"))),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let mut sorted = algs.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != algs.len() {
            return Err(invalid(format!("combination {s:?} repeats an algorithm")));
        }
        Ok(Combination(algs))
    }
}

impl TryFrom<String> for Combination {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Combination> for String {
    fn from(c: Combination) -> String {
        c.to_string()
    }
}

/// One file worth of trajectories sharing combination, mode and length.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectorySet {
    pub combination: Combination,
    pub mode: Mode,
    pub generations: usize,
    pub trajectories: Vec<Trajectory>,
}

const META_COLUMNS: [&str; 7] =
    ["kind", "mode", "generations", "function_id", "instance_id", "run_index", "label"];

impl TrajectorySet {
    pub fn width(&self) -> Option<usize> {
        self.trajectories.first().map(|t| t.values.len())
    }

    pub fn write_csv(&self, path: &Path, config_hash: &str) -> Result<()> {
        let width = self.width().unwrap_or(0);
        if self.trajectories.iter().any(|t| t.values.len() != width) {
            return Err(invalid("ragged trajectory lengths within one dataset"));
        }
        let mut out = BufWriter::new(fs::File::create(path)?);
        writeln!(out, "# config_hash={config_hash}")?;
        let mut header: Vec<String> = META_COLUMNS.iter().map(|s| s.to_string()).collect();
        header.extend((0..width).map(|i| format!("v{i}")));
        writeln!(out, "{}", header.join(","))?;
        for t in &self.trajectories {
            write!(
                out,
                "{},{},{},{},{},{},{}",
                self.combination,
                self.mode,
                self.generations,
                t.origin.function_id,
                t.origin.instance_id,
                t.origin.run_index,
                t.label.map(|l| l.to_string()).unwrap_or_default()
            )?;
            for v in &t.values {
                write!(out, ",{v:?}")?;
            }
            writeln!(out)?;
        }
        out.flush()?;
        Ok(())
    }

    /// Reads a set written by [`write_csv`](Self::write_csv). Part layout is
    /// rebuilt from the combination and `population`.
    pub fn read_csv(path: &Path, population: impl Fn(Algorithm) -> usize) -> Result<(Self, String)> {
        let text = fs::read_to_string(path)?;
        let mut lines = text.lines();
        let hash = lines
            .next()
            .and_then(|l| l.strip_prefix("# config_hash="))
            .ok_or_else(|| Error::Format(format!("{} lacks a config hash line", path.display())))?
            .to_string();
        let header: Vec<&str> = lines.next().unwrap_or_default().split(',').collect();
        if header.len() < META_COLUMNS.len() || header[..META_COLUMNS.len()] != META_COLUMNS {
            return Err(Error::Format(format!("{}: unexpected header", path.display())));
        }
        let width = header.len() - META_COLUMNS.len();
        let mut set: Option<TrajectorySet> = None;
        for line in lines {
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != header.len() {
                return Err(Error::Format(format!("{}: ragged row", path.display())));
            }
            let combination: Combination = cols[0].parse()?;
            let mode: Mode = cols[1].parse()?;
            let num = |s: &str| s.parse::<u64>().map_err(|e| Error::Format(format!("{s:?}: {e}")));
            let generations = num(cols[2])? as usize;
            let label = if cols[6].is_empty() { None } else { Some(cols[6].parse()?) };
            let values = cols[7..]
                .iter()
                .map(|s| s.parse::<f64>().map_err(|e| Error::Format(format!("{s:?}: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            let parts = combination
                .0
                .iter()
                .map(|&a| Part { algorithm: a, generations, population_size: population(a) })
                .collect();
            let t = Trajectory {
                values,
                mode,
                parts,
                origin: Origin {
                    function_id: num(cols[3])? as u32,
                    instance_id: num(cols[4])? as u32,
                    run_index: num(cols[5])? as u32,
                },
                label,
            };
            t.check_layout()?;
            let s = set.get_or_insert_with(|| TrajectorySet {
                combination: combination.clone(),
                mode,
                generations,
                trajectories: Vec::new(),
            });
            if s.combination != combination || s.mode != mode || s.generations != generations {
                return Err(Error::Format(format!("{}: mixed kinds in one file", path.display())));
            }
            s.trajectories.push(t);
        }
        let set = set.ok_or_else(|| Error::Format(format!("{}: no rows", path.display())))?;
        debug_assert_eq!(set.width(), Some(width));
        Ok((set, hash))
    }
}
