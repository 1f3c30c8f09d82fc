//! Dataset loading and generation for the neuron-pruning experiments.
//!
//! File formats: CSV rows of `x_1,...,x_d,y`, or JSON
//! `{"points": [[...], ...], "labels": [...]}`.

use anyhow::{bail, Context};
use rand::Rng;

use subnet_core::matrix::norm2;
use subnet_core::RngStream;

use crate::config::{DatasetConfig, GeneratorKind};

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Dataset {
    pub points: Vec<Vec<f64>>,
    pub labels: Vec<f64>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.first().map_or(0, Vec::len)
    }
}

fn parse_csv(text: &str) -> anyhow::Result<Dataset> {
    let mut points = Vec::new();
    let mut labels = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<f64> = line
            .split(',')
            .map(|f| f.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .with_context(|| format!("line {}: non-numeric field", lineno + 1))?;
        if fields.len() < 2 {
            bail!("line {}: need at least one x column and a label", lineno + 1);
        }
        let (x, y) = fields.split_at(fields.len() - 1);
        points.push(x.to_vec());
        labels.push(y[0]);
    }
    Ok(Dataset { points, labels })
}

pub fn load_dataset(config: &DatasetConfig, stream: RngStream) -> anyhow::Result<Dataset> {
    let dataset = match config {
        DatasetConfig::File { path } => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading dataset {}", path.display()))?;
            if path.extension().is_some_and(|e| e == "json") {
                serde_json::from_str(&text)
                    .with_context(|| format!("parsing dataset {}", path.display()))?
            } else {
                parse_csv(&text)?
            }
        }
        DatasetConfig::Generated {
            generator,
            m,
            dim,
            labels,
        } => {
            let m = *m;
            let points: Vec<Vec<f64>> = match generator {
                GeneratorKind::Basis => {
                    let d = dim.unwrap_or(m);
                    if d < m {
                        bail!("basis generator needs dim >= m");
                    }
                    (0..m)
                        .map(|i| {
                            let mut x = vec![0.0; d];
                            x[i] = 1.0;
                            x
                        })
                        .collect()
                }
                GeneratorKind::Antipodal => {
                    if m != 2 {
                        bail!("antipodal generator produces exactly m = 2 points");
                    }
                    let d = dim.unwrap_or(2);
                    let mut plus = vec![0.0; d];
                    plus[0] = 1.0;
                    let mut minus = vec![0.0; d];
                    minus[0] = -1.0;
                    vec![plus, minus]
                }
                GeneratorKind::Sphere => {
                    let d = dim.context("sphere generator needs dim")?;
                    let mut rng = stream.rng();
                    (0..m)
                        .map(|_| loop {
                            let x: Vec<f64> =
                                (0..d).map(|_| rng.random_range(-1.0..=1.0)).collect();
                            let n = norm2(&x);
                            if n > 1e-6 {
                                break x.iter().map(|v| v / n).collect();
                            }
                        })
                        .collect()
                }
            };
            let labels = match labels {
                Some(l) => l.clone(),
                // Alternating +-1 by default.
                None => (0..m).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect(),
            };
            Dataset { points, labels }
        }
    };
    if dataset.is_empty() {
        bail!("dataset has no points");
    }
    if dataset.labels.len() != dataset.len() {
        bail!(
            "dataset has {} points but {} labels",
            dataset.len(),
            dataset.labels.len()
        );
    }
    if dataset.labels.iter().any(|y| y.abs() > 1.0) {
        bail!("labels must lie in [-1, 1]");
    }
    Ok(dataset)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_rows_parse() {
        let data = parse_csv("0.5, 0.25, 1\n-0.5,0.0,-1\n").unwrap();
        assert_eq!(data.points, vec![vec![0.5, 0.25], vec![-0.5, 0.0]]);
        assert_eq!(data.labels, vec![1.0, -1.0]);
    }

    #[test]
    fn basis_generator_defaults() {
        let config = DatasetConfig::Generated {
            generator: GeneratorKind::Basis,
            m: 3,
            dim: None,
            labels: None,
        };
        let data = load_dataset(&config, RngStream::new(0)).unwrap();
        assert_eq!(data.points[1], vec![0.0, 1.0, 0.0]);
        assert_eq!(data.labels, vec![1.0, -1.0, 1.0]);
    }

    #[test]
    fn sphere_points_are_unit() {
        let config = DatasetConfig::Generated {
            generator: GeneratorKind::Sphere,
            m: 8,
            dim: Some(5),
            labels: None,
        };
        let data = load_dataset(&config, RngStream::new(3)).unwrap();
        for x in &data.points {
            assert!((norm2(x) - 1.0).abs() < 1e-12);
        }
    }
}
