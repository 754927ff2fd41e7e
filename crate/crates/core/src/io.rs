//! Observation and model file formats.
//!
//! Observation files are UTF-8 text with one observation per line as
//! whitespace-separated vertex labels. `#` starts a comment line and the
//! directive `%endpoints known|free` sets the endpoint mode for the whole
//! file (default free). Lines with repeated vertices are rejected and
//! counted in the diagnostics rather than aborting the parse.
//!
//! Model files are JSON:
//! `{"labels": [...], "pi": [...], "A": [[...]], "theta_min": x}`.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{NicoError, Result};
use crate::model::{EndpointMode, MarkovModel, Observation, StateSpace};

/// Ingestion report: lines that were dropped and why.
#[derive(Debug, Clone, Default)]
pub struct ObsDiagnostics {
    /// `(line number, reason)` for every rejected observation line.
    pub rejected_lines: Vec<(usize, String)>,
}

/// A parsed observation file.
#[derive(Debug, Clone)]
pub struct ObservationData {
    pub space: StateSpace,
    pub observations: Vec<Observation>,
    pub mode: EndpointMode,
    pub diagnostics: ObsDiagnostics,
}

fn parse_rows<R: BufRead>(
    reader: R,
) -> Result<(Vec<(usize, Vec<String>)>, EndpointMode, ObsDiagnostics)> {
    let mut rows: Vec<(usize, Vec<String>)> = Vec::new();
    let mut mode = EndpointMode::Free;
    let mut directive_line: Option<usize> = None;
    let mut diagnostics = ObsDiagnostics::default();

    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix('%') {
            let mut it = rest.split_whitespace();
            match (it.next(), it.next(), it.next()) {
                (Some("endpoints"), Some(value), None) => {
                    let new_mode = match value {
                        "known" => EndpointMode::KnownEndpoints,
                        "free" => EndpointMode::Free,
                        other => {
                            return Err(NicoError::Parse {
                                line: lineno,
                                message: format!(
                                    "endpoints directive expects known|free, got {other:?}"
                                ),
                            })
                        }
                    };
                    if let Some(prev) = directive_line {
                        if new_mode != mode {
                            return Err(NicoError::Parse {
                                line: lineno,
                                message: format!(
                                    "conflicting %endpoints directive (first set at line {prev})"
                                ),
                            });
                        }
                    }
                    mode = new_mode;
                    directive_line = Some(lineno);
                }
                _ => {
                    return Err(NicoError::Parse {
                        line: lineno,
                        message: format!("unknown directive {trimmed:?}"),
                    })
                }
            }
            continue;
        }
        let labels: Vec<String> = trimmed.split_whitespace().map(str::to_string).collect();
        let mut seen = std::collections::HashSet::new();
        if let Some(dup) = labels.iter().find(|l| !seen.insert(l.as_str())) {
            diagnostics
                .rejected_lines
                .push((lineno, format!("repeated vertex {dup:?}")));
            continue;
        }
        rows.push((lineno, labels));
    }
    Ok((rows, mode, diagnostics))
}

fn build_observations(
    rows: Vec<(usize, Vec<String>)>,
    mode: EndpointMode,
    index_of: impl Fn(&str, usize) -> Result<usize>,
) -> Result<Vec<Observation>> {
    let mut observations = Vec::with_capacity(rows.len());
    for (lineno, labels) in rows {
        if mode == EndpointMode::KnownEndpoints && labels.len() < 2 {
            return Err(NicoError::Parse {
                line: lineno,
                message: "known-endpoints observation needs at least two vertices".into(),
            });
        }
        let states = labels
            .iter()
            .map(|l| index_of(l, lineno))
            .collect::<Result<Vec<usize>>>()?;
        let obs = Observation::new(states, mode).map_err(|e| NicoError::Parse {
            line: lineno,
            message: e.to_string(),
        })?;
        observations.push(obs);
    }
    Ok(observations)
}

/// Parses an observation file, building the label table in first-seen order.
pub fn parse_observations<R: BufRead>(reader: R) -> Result<ObservationData> {
    let (rows, mode, diagnostics) = parse_rows(reader)?;
    let mut labels: Vec<String> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    for (_, row) in &rows {
        for label in row {
            if !index.contains_key(label) {
                index.insert(label.clone(), labels.len());
                labels.push(label.clone());
            }
        }
    }
    if labels.is_empty() {
        return Err(NicoError::NoObservations);
    }
    let observations = build_observations(rows, mode, |l, _| Ok(index[l]))?;
    Ok(ObservationData {
        space: StateSpace::new(labels)?,
        observations,
        mode,
        diagnostics,
    })
}

/// Parses an observation file against an existing label set; unknown
/// labels are an error carrying the line number.
pub fn parse_observations_with_space<R: BufRead>(
    reader: R,
    space: &StateSpace,
) -> Result<ObservationData> {
    let (rows, mode, diagnostics) = parse_rows(reader)?;
    let observations = build_observations(rows, mode, |l, lineno| {
        space.index_of(l).ok_or_else(|| NicoError::UnknownLabel {
            label: l.to_string(),
            line: lineno,
        })
    })?;
    Ok(ObservationData {
        space: space.clone(),
        observations,
        mode,
        diagnostics,
    })
}

pub fn read_observations_file<P: AsRef<Path>>(path: P) -> Result<ObservationData> {
    let f = std::fs::File::open(path)?;
    parse_observations(BufReader::new(f))
}

pub fn read_observations_file_with_space<P: AsRef<Path>>(
    path: P,
    space: &StateSpace,
) -> Result<ObservationData> {
    let f = std::fs::File::open(path)?;
    parse_observations_with_space(BufReader::new(f), space)
}

/// Writes observations in the file format, including the endpoint
/// directive when the mode is known-endpoints.
pub fn write_observations<W: Write>(
    mut w: W,
    space: &StateSpace,
    observations: &[Observation],
    mode: EndpointMode,
) -> Result<()> {
    if mode == EndpointMode::KnownEndpoints {
        writeln!(w, "%endpoints known")?;
    }
    for obs in observations {
        let line: Vec<&str> = obs.states().iter().map(|&s| space.label(s)).collect();
        writeln!(w, "{}", line.join(" "))?;
    }
    Ok(())
}

pub fn write_observations_file<P: AsRef<Path>>(
    path: P,
    space: &StateSpace,
    observations: &[Observation],
    mode: EndpointMode,
) -> Result<()> {
    let f = std::fs::File::create(path)?;
    write_observations(std::io::BufWriter::new(f), space, observations, mode)
}

/// Writes ordered paths (one per line) for use as evaluation references.
pub fn write_paths_file<P: AsRef<Path>>(
    path: P,
    space: &StateSpace,
    paths: &[Vec<usize>],
) -> Result<()> {
    let f = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(f);
    for p in paths {
        let line: Vec<&str> = p.iter().map(|&s| space.label(s)).collect();
        writeln!(w, "{}", line.join(" "))?;
    }
    Ok(())
}

/// Reads ordered paths written by [`write_paths_file`].
pub fn read_paths_file<P: AsRef<Path>>(path: P, space: &StateSpace) -> Result<Vec<Vec<usize>>> {
    let f = std::fs::File::open(path)?;
    let mut paths = Vec::new();
    for (idx, line) in BufReader::new(f).lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let states = trimmed
            .split_whitespace()
            .map(|l| {
                space.index_of(l).ok_or_else(|| NicoError::UnknownLabel {
                    label: l.to_string(),
                    line: idx + 1,
                })
            })
            .collect::<Result<Vec<usize>>>()?;
        paths.push(states);
    }
    Ok(paths)
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    labels: Vec<String>,
    pi: Vec<f64>,
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    theta_min: f64,
}

pub fn write_model<W: Write>(w: W, space: &StateSpace, model: &MarkovModel) -> Result<()> {
    let file = ModelFile {
        labels: space.labels().to_vec(),
        pi: model.pi.to_vec(),
        a: model
            .a
            .rows()
            .into_iter()
            .map(|r| r.to_vec())
            .collect(),
        theta_min: model.theta_min,
    };
    serde_json::to_writer(w, &file)?;
    Ok(())
}

pub fn write_model_file<P: AsRef<Path>>(
    path: P,
    space: &StateSpace,
    model: &MarkovModel,
) -> Result<()> {
    let f = std::fs::File::create(path)?;
    write_model(std::io::BufWriter::new(f), space, model)
}

pub fn read_model<R: std::io::Read>(r: R) -> Result<(StateSpace, MarkovModel)> {
    let file: ModelFile = serde_json::from_reader(r)?;
    let n = file.labels.len();
    if file.pi.len() != n || file.a.len() != n || file.a.iter().any(|row| row.len() != n) {
        return Err(NicoError::DimensionMismatch(format!(
            "model file with {n} labels has pi of length {} and A of shape {}x{}",
            file.pi.len(),
            file.a.len(),
            file.a.first().map_or(0, Vec::len)
        )));
    }
    let space = StateSpace::new(file.labels)?;
    let pi = Array1::from_vec(file.pi);
    let mut a = Array2::zeros((n, n));
    for (i, row) in file.a.into_iter().enumerate() {
        for (j, v) in row.into_iter().enumerate() {
            a[[i, j]] = v;
        }
    }
    let model = MarkovModel::new(pi, a, file.theta_min)?;
    Ok((space, model))
}

pub fn read_model_file<P: AsRef<Path>>(path: P) -> Result<(StateSpace, MarkovModel)> {
    let f = std::fs::File::open(path)?;
    read_model(BufReader::new(f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{arr1, arr2};
    use std::io::Cursor;

    #[test]
    fn parses_labels_comments_and_mode() {
        let text = "# traceroute-ish sample\n%endpoints known\na b c\nc a d\n\n";
        let data = parse_observations(Cursor::new(text)).unwrap();
        assert_eq!(data.mode, EndpointMode::KnownEndpoints);
        assert_eq!(data.space.labels(), &["a", "b", "c", "d"]);
        assert_eq!(data.observations.len(), 2);
        assert_eq!(data.observations[0].states(), &[0, 1, 2]);
        assert_eq!(data.observations[1].states(), &[2, 0, 3]);
    }

    #[test]
    fn default_mode_is_free() {
        let data = parse_observations(Cursor::new("x y\n")).unwrap();
        assert_eq!(data.mode, EndpointMode::Free);
    }

    #[test]
    fn repeated_vertices_are_rejected_and_counted() {
        let text = "a b\na b a\nc d\n";
        let data = parse_observations(Cursor::new(text)).unwrap();
        assert_eq!(data.observations.len(), 2);
        assert_eq!(data.diagnostics.rejected_lines.len(), 1);
        assert_eq!(data.diagnostics.rejected_lines[0].0, 2);
    }

    #[test]
    fn unknown_directive_is_an_error_with_line() {
        let err = parse_observations(Cursor::new("%endpoint known\na b\n")).unwrap_err();
        match err {
            NicoError::Parse { line, .. } => assert_eq!(line, 1),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn known_endpoints_singleton_is_an_error_with_line() {
        let err = parse_observations(Cursor::new("%endpoints known\na b\nc\n")).unwrap_err();
        match err {
            NicoError::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn fixed_space_rejects_unknown_labels() {
        let space = StateSpace::new(vec!["a".into(), "b".into()]).unwrap();
        let err =
            parse_observations_with_space(Cursor::new("a b\na z\n"), &space).unwrap_err();
        match err {
            NicoError::UnknownLabel { label, line } => {
                assert_eq!(label, "z");
                assert_eq!(line, 2);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn observation_roundtrip() {
        let text = "%endpoints known\na b c\nb c d\n";
        let data = parse_observations(Cursor::new(text)).unwrap();
        let mut out = Vec::new();
        write_observations(&mut out, &data.space, &data.observations, data.mode).unwrap();
        let again = parse_observations(Cursor::new(out)).unwrap();
        assert_eq!(again.mode, data.mode);
        assert_eq!(again.observations, data.observations);
    }

    #[test]
    fn model_roundtrip() {
        let space = StateSpace::new(vec!["a".into(), "b".into()]).unwrap();
        let model = MarkovModel::new(
            arr1(&[0.25, 0.75]),
            arr2(&[[0.5, 0.5], [0.9, 0.1]]),
            1e-9,
        )
        .unwrap();
        let mut buf = Vec::new();
        write_model(&mut buf, &space, &model).unwrap();
        let (space2, model2) = read_model(Cursor::new(buf)).unwrap();
        assert_eq!(space2, space);
        assert_eq!(model2.pi, model.pi);
        assert_eq!(model2.a, model.a);
        assert_eq!(model2.theta_min, model.theta_min);
    }

    #[test]
    fn model_file_dimension_check() {
        let text = r#"{"labels":["a","b"],"pi":[1.0],"A":[[1.0,0.0],[0.0,1.0]],"theta_min":0.0}"#;
        assert!(matches!(
            read_model(Cursor::new(text)),
            Err(NicoError::DimensionMismatch(_))
        ));
    }
}
