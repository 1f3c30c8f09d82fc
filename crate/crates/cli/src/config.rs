//! Experiment configuration: a single JSON file, with seed/trials/output
//! overridable from the command line. Validation resolves widths and
//! per-experiment defaults before anything runs, and the resolved config
//! is embedded in the report so every run is replayable from its report
//! alone.

use std::path::PathBuf;

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

use subnet_core::neuron_prune::CoefficientFn;
use subnet_core::verify::Domain;
use subnet_core::weight_prune::{required_width, Lemma, RequiredWidth, WidthParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentId {
    LemmaOneCoord,
    LemmaLinear,
    LemmaNeuron,
    Thm2Shallow,
    Thm1Deep,
    FiniteDataset,
    Rkhs,
    KernelEigen,
    BruteForceOracle,
}

impl ExperimentId {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentId::LemmaOneCoord => "lemma-one-coord",
            ExperimentId::LemmaLinear => "lemma-linear",
            ExperimentId::LemmaNeuron => "lemma-neuron",
            ExperimentId::Thm2Shallow => "thm2-shallow",
            ExperimentId::Thm1Deep => "thm1-deep",
            ExperimentId::FiniteDataset => "finite-dataset",
            ExperimentId::Rkhs => "rkhs",
            ExperimentId::KernelEigen => "kernel-eigen",
            ExperimentId::BruteForceOracle => "brute-force-oracle",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dims {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    pub epsilon: f64,
    pub delta: f64,
    /// Optional override of the derived closeness-mask window.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps_prime: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FormulaTag {
    PaperFormula,
}

/// Widths: explicit, or resolved through the width formulas.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WidthsSpec {
    Named(FormulaTag),
    Single { k: usize },
    Pair { k1: usize, k2: usize },
}

impl Default for WidthsSpec {
    fn default() -> Self {
        WidthsSpec::Named(FormulaTag::PaperFormula)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerConfig {
    pub mode: Domain,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DatasetConfig {
    File {
        path: PathBuf,
    },
    Generated {
        generator: GeneratorKind,
        m: usize,
        #[serde(skip_serializing_if = "Option::is_none")]
        dim: Option<usize>,
        #[serde(skip_serializing_if = "Option::is_none")]
        labels: Option<Vec<f64>>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeneratorKind {
    /// Standard basis vectors e_1..e_m (dim defaults to m).
    Basis,
    /// Antipodal pair +-e_1 (m must be 2).
    Antipodal,
    /// Seed-derived uniform points on the unit sphere.
    Sphere,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RkhsConfig {
    pub dim: usize,
    pub h: CoefficientFn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentId,
    #[serde(default)]
    pub dims: Dims,
    pub tolerances: Tolerances,
    #[serde(default)]
    pub widths: WidthsSpec,
    pub trials: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampler: Option<SamplerConfig>,
    pub seed: u64,
    /// Monte Carlo sample count for kernel estimates.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc_samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<DatasetConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rkhs: Option<RkhsConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_file(path: &std::path::Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let config: ExperimentConfig =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        Ok(config)
    }

    fn dim(&self, field: &str, value: Option<usize>) -> anyhow::Result<usize> {
        value.with_context(|| {
            format!(
                "experiment {} requires dims.{field}",
                self.experiment.as_str()
            )
        })
    }

    /// Validate fields against the chosen experiment and resolve widths,
    /// sampler defaults, and Monte Carlo sample counts.
    pub fn resolve(&self) -> anyhow::Result<ExperimentConfig> {
        let mut resolved = self.clone();
        let eps = self.tolerances.epsilon;
        let delta = self.tolerances.delta;
        if !eps.is_finite() || eps <= 0.0 {
            bail!("tolerances.epsilon must be positive");
        }
        if !(delta > 0.0 && delta < 1.0) {
            bail!("tolerances.delta must be in (0, 1)");
        }
        if self.trials == 0 {
            bail!("trials must be at least 1");
        }

        let width_params = |s: usize, n: usize, d: usize, l: usize| WidthParams {
            s,
            n,
            d,
            l,
            epsilon: eps,
            delta,
        };
        let default_sampler = |mode: Domain| SamplerConfig { mode, count: 10_000 };

        match self.experiment {
            ExperimentId::LemmaOneCoord => {
                let d = self.dim("d", self.dims.d)?;
                let s = self.dims.s.unwrap_or(d);
                resolved.dims.s = Some(s);
                resolved.widths = match self.widths {
                    WidthsSpec::Named(_) => WidthsSpec::Single {
                        k: required_width(Lemma::OneCoord, &width_params(s, 1, d, 1)).single(),
                    },
                    w @ WidthsSpec::Single { .. } => w,
                    WidthsSpec::Pair { .. } => bail!("lemma-one-coord takes a single width k"),
                };
                resolved.sampler = Some(
                    self.sampler
                        .unwrap_or_else(|| default_sampler(Domain::LinfCube)),
                );
            }
            ExperimentId::LemmaLinear => {
                let d = self.dim("d", self.dims.d)?;
                let s = self.dims.s.unwrap_or(d);
                if s > d {
                    bail!("dims.s must be at most dims.d");
                }
                resolved.dims.s = Some(s);
                resolved.widths = match self.widths {
                    WidthsSpec::Named(_) => WidthsSpec::Single {
                        k: required_width(Lemma::LinearFunc, &width_params(s, 1, d, 1)).single(),
                    },
                    w @ WidthsSpec::Single { .. } => w,
                    WidthsSpec::Pair { .. } => bail!("lemma-linear takes a single width k"),
                };
                resolved.sampler = Some(
                    self.sampler
                        .unwrap_or_else(|| default_sampler(Domain::LinfCube)),
                );
            }
            ExperimentId::LemmaNeuron | ExperimentId::Thm2Shallow => {
                let d = self.dim("d", self.dims.d)?;
                let n = if self.experiment == ExperimentId::Thm2Shallow {
                    self.dim("n", self.dims.n)?
                } else {
                    1
                };
                let s = self.dims.s.unwrap_or(d);
                if s > d {
                    bail!("dims.s must be at most dims.d");
                }
                resolved.dims.s = Some(s);
                let lemma = if self.experiment == ExperimentId::Thm2Shallow {
                    Lemma::ReluNetwork
                } else {
                    Lemma::OneNeuron
                };
                resolved.widths = match self.widths {
                    WidthsSpec::Named(_) => {
                        let RequiredWidth::Pair { k1, k2 } =
                            required_width(lemma, &width_params(s, n, d, 1))
                        else {
                            unreachable!()
                        };
                        WidthsSpec::Pair { k1, k2 }
                    }
                    w @ WidthsSpec::Pair { .. } => w,
                    WidthsSpec::Single { .. } => {
                        bail!("{} takes a width pair k1, k2", self.experiment.as_str())
                    }
                };
                resolved.sampler = Some(
                    self.sampler
                        .unwrap_or_else(|| default_sampler(Domain::L2Ball)),
                );
            }
            ExperimentId::Thm1Deep => {
                let d = self.dim("d", self.dims.d)?;
                let n = self.dim("n", self.dims.n)?;
                let l = self.dim("l", self.dims.l)?;
                let s = self.dims.s.unwrap_or_else(|| d.max(n));
                resolved.dims.s = Some(s);
                resolved.widths = match self.widths {
                    WidthsSpec::Named(_) => WidthsSpec::Single {
                        k: required_width(Lemma::Deep, &width_params(s, n, d, l)).single(),
                    },
                    w @ WidthsSpec::Single { .. } => w,
                    WidthsSpec::Pair { .. } => bail!("thm1-deep takes a single width k"),
                };
                resolved.sampler = Some(
                    self.sampler
                        .unwrap_or_else(|| default_sampler(Domain::L2Ball)),
                );
            }
            ExperimentId::FiniteDataset => {
                if self.dataset.is_none() {
                    bail!("finite-dataset requires a dataset");
                }
                let WidthsSpec::Pair { .. } = self.widths else {
                    bail!(
                        "finite-dataset requires explicit widths {{k1, k2}}: the formula widths \
                         are astronomically large and are reported in the output instead"
                    );
                };
                resolved.mc_samples = Some(self.mc_samples.unwrap_or(1_000_000));
            }
            ExperimentId::Rkhs => {
                if self.rkhs.is_none() {
                    bail!("rkhs requires an rkhs target section");
                }
                let WidthsSpec::Pair { .. } = self.widths else {
                    bail!(
                        "rkhs requires explicit widths {{k1, k2}}: the formula widths are \
                         astronomically large and are reported in the output instead"
                    );
                };
                resolved.sampler = Some(self.sampler.unwrap_or(SamplerConfig {
                    mode: Domain::L2Ball,
                    count: 200,
                }));
                resolved.mc_samples = Some(self.mc_samples.unwrap_or(1_000_000));
            }
            ExperimentId::KernelEigen => {
                resolved.dataset = Some(self.dataset.clone().unwrap_or(DatasetConfig::Generated {
                    generator: GeneratorKind::Antipodal,
                    m: 2,
                    dim: Some(2),
                    labels: None,
                }));
                resolved.mc_samples = Some(self.mc_samples.unwrap_or(10_000_000));
                // Widths resolved at run time from the reference lambda.
            }
            ExperimentId::BruteForceOracle => {
                let d = self.dims.d.unwrap_or(2);
                if d > 2 {
                    bail!("brute-force-oracle instances keep d <= 2 to stay enumerable");
                }
                resolved.dims.d = Some(d);
                resolved.widths = match self.widths {
                    WidthsSpec::Named(_) => WidthsSpec::Single { k: 5 },
                    w @ WidthsSpec::Single { .. } => w,
                    WidthsSpec::Pair { .. } => bail!("brute-force-oracle takes a single width k"),
                };
                let WidthsSpec::Single { k } = resolved.widths else { unreachable!() };
                if (k * d + k) > 24 {
                    bail!("brute-force-oracle instance has {} weights > 24", k * d + k);
                }
                resolved.sampler = Some(self.sampler.unwrap_or(SamplerConfig {
                    mode: Domain::LinfCube,
                    count: 128,
                }));
            }
        }
        Ok(resolved)
    }
}
