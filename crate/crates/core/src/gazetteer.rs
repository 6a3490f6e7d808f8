//! Alias table from mention strings to candidate locations with
//! populations: the population baseline and the population-discounted
//! constrained selection rule.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::Deserialize;

use crate::cellgrid::LatLng;
use crate::error::{Error, Result};
use crate::geodesy::great_circle_km;

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub name: String,
    pub location: LatLng,
    pub population: u64,
}

#[derive(Debug, Default)]
struct MentionEntry {
    candidates: Vec<Candidate>,
    max_population: u64,
}

/// Case-folded mention -> candidate locations. Immutable after load.
#[derive(Debug, Default)]
pub struct Gazetteer {
    entries: HashMap<String, MentionEntry>,
}

#[derive(Debug, Deserialize)]
struct RawEntry {
    mention: String,
    name: String,
    lat: f64,
    lng: f64,
    population: u64,
}

impl Gazetteer {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn candidates(&self, mention: &str) -> Option<&[Candidate]> {
        self.entries
            .get(&mention.to_lowercase())
            .map(|e| e.candidates.as_slice())
    }

    fn entry(&self, mention: &str) -> Result<&MentionEntry> {
        self.entries
            .get(&mention.to_lowercase())
            .ok_or_else(|| Error::NoCandidate(mention.to_string()))
    }

    /// Most populous candidate; ties go to the lexicographically smallest
    /// name.
    pub fn pop_baseline(&self, mention: &str) -> Result<&Candidate> {
        let entry = self.entry(mention)?;
        let mut best = &entry.candidates[0];
        for c in &entry.candidates[1..] {
            if c.population > best.population
                || (c.population == best.population && c.name < best.name)
            {
                best = c;
            }
        }
        Ok(best)
    }

    /// Minimizer of `dist(p, l) * (1 - c * pop(l) / pop(m))` over the
    /// mention's candidates, where `pop(m)` is the largest candidate
    /// population. Ties resolve to the smaller distance, then the smaller
    /// name. `c = 0` picks the nearest candidate, `c = 1` the most populous.
    pub fn constrained_select(&self, mention: &str, p: LatLng, c: f64) -> Result<&Candidate> {
        if !(0.0..=1.0).contains(&c) {
            return Err(Error::InvalidArgument(format!(
                "population bias {c} outside [0, 1]"
            )));
        }
        let entry = self.entry(mention)?;
        let objective = |cand: &Candidate| {
            let dist = great_circle_km(p, cand.location);
            // pop(m) = 0 means every ratio is 0: pure distance.
            let ratio = if entry.max_population == 0 {
                0.0
            } else {
                cand.population as f64 / entry.max_population as f64
            };
            (dist * (1.0 - c * ratio), dist)
        };
        let mut best = &entry.candidates[0];
        let (mut best_score, mut best_dist) = objective(best);
        for cand in &entry.candidates[1..] {
            let (score, dist) = objective(cand);
            let better = score < best_score
                || (score == best_score
                    && (dist < best_dist || (dist == best_dist && cand.name < best.name)));
            if better {
                best = cand;
                best_score = score;
                best_dist = dist;
            }
        }
        Ok(best)
    }

    fn add(&mut self, raw: RawEntry, line: usize) -> Result<()> {
        let location = LatLng::new(raw.lat, raw.lng).map_err(|e| Error::Validation {
            line,
            msg: format!("bad coordinates for {:?}: {e}", raw.name),
        })?;
        let entry = self.entries.entry(raw.mention.to_lowercase()).or_default();
        // duplicate (name, coords) rows collapse; keep the larger population
        if let Some(existing) = entry
            .candidates
            .iter_mut()
            .find(|c| c.name == raw.name && c.location == location)
        {
            existing.population = existing.population.max(raw.population);
        } else {
            entry.candidates.push(Candidate {
                name: raw.name,
                location,
                population: raw.population,
            });
        }
        Ok(())
    }

    fn finish(mut self) -> Self {
        for entry in self.entries.values_mut() {
            entry
                .candidates
                .sort_by(|a, b| a.name.cmp(&b.name).then(a.population.cmp(&b.population)));
            entry.max_population = entry
                .candidates
                .iter()
                .map(|c| c.population)
                .max()
                .unwrap_or(0);
        }
        self
    }
}

/// Loads a gazetteer from JSONL (`{mention, name, lat, lng, population}`)
/// or, for paths ending in `.tsv`, tab-separated columns in that order.
pub fn load_gazetteer(path: &Path) -> Result<Gazetteer> {
    let tsv = path.extension().is_some_and(|e| e == "tsv");
    let file = File::open(path)?;
    let mut gazetteer = Gazetteer::default();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line_text = line?;
        if line_text.trim().is_empty() {
            continue;
        }
        let line_no = idx + 1;
        let raw = if tsv {
            parse_tsv_line(&line_text, line_no)?
        } else {
            serde_json::from_str(&line_text).map_err(|e| Error::Parse {
                line: line_no,
                msg: e.to_string(),
            })?
        };
        gazetteer.add(raw, line_no)?;
    }
    Ok(gazetteer.finish())
}

fn parse_tsv_line(line: &str, line_no: usize) -> Result<RawEntry> {
    let parse_err = |msg: String| Error::Parse { line: line_no, msg };
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() != 5 {
        return Err(parse_err(format!(
            "expected 5 tab-separated fields, found {}",
            fields.len()
        )));
    }
    Ok(RawEntry {
        mention: fields[0].to_string(),
        name: fields[1].to_string(),
        lat: fields[2]
            .parse()
            .map_err(|e| parse_err(format!("bad lat: {e}")))?,
        lng: fields[3]
            .parse()
            .map_err(|e| parse_err(format!("bad lng: {e}")))?,
        population: fields[4]
            .parse()
            .map_err(|e| parse_err(format!("bad population: {e}")))?,
    })
}
