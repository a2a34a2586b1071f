//! Batch comparators: windowed ordinary least squares over a stored
//! dataset, and the phase-averaged baseline used by the confidence metric.
//!
//! The batch fit uses the same regressor, window-center offsets, and
//! Fourier smoothing as the recursive bank, so with a full-history
//! forgetting factor the two routes agree up to the recursive filter's
//! prior. The phase average also exists in a recursive form so the online
//! confidence metric needs no stored dataset.

use crate::adaptive::{build_regressor, regressor_dim, RlsConfig, RlsFilter, OUTPUTS};
use crate::error::{Error, Result};
use crate::gait::{normalize_phase, Gait, PhaseWindowGrid};
use crate::se2::BodyVelocity;
use crate::smoothing::{validate_order, SmoothedWeightField};
use crate::swimmer::{Shape, ShapeVelocity, SimStep};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};

/// A single stored observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub phi: f64,
    pub shape: Shape,
    pub shape_vel: ShapeVelocity,
    pub xi: BodyVelocity,
}

impl From<&SimStep> for Sample {
    fn from(step: &SimStep) -> Self {
        Sample {
            t: step.t,
            phi: step.phi,
            shape: step.shape.clone(),
            shape_vel: step.shape_vel.clone(),
            xi: step.xi,
        }
    }
}

/// Append-only store of `(t, phi, r, r_dot, xi)` tuples with a homogeneous
/// shape dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleStore {
    dim: usize,
    samples: Vec<Sample>,
}

impl SampleStore {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            samples: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn push(&mut self, mut sample: Sample) -> Result<()> {
        if sample.shape.dim() != self.dim || sample.shape_vel.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: sample.shape.dim(),
            });
        }
        if !sample.xi.is_finite() || !sample.t.is_finite() || !sample.phi.is_finite() {
            return Err(Error::NonFiniteSample);
        }
        sample.phi = normalize_phase(sample.phi);
        self.samples.push(sample);
        Ok(())
    }

    pub fn push_step(&mut self, step: &SimStep) -> Result<()> {
        self.push(Sample::from(step))
    }

    /// CSV header for this store's dimension:
    /// `t,phi,r_1..r_d,rdot_1..rdot_d,xi_x,xi_y,xi_theta`.
    pub fn csv_header(dim: usize) -> String {
        let mut cols = vec!["t".to_string(), "phi".to_string()];
        cols.extend((1..=dim).map(|i| format!("r_{i}")));
        cols.extend((1..=dim).map(|i| format!("rdot_{i}")));
        cols.extend(["xi_x".into(), "xi_y".into(), "xi_theta".into()]);
        cols.join(",")
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{}", Self::csv_header(self.dim))?;
        for s in &self.samples {
            let mut fields = Vec::with_capacity(2 * self.dim + 5);
            fields.push(s.t.to_string());
            fields.push(s.phi.to_string());
            fields.extend(s.shape.as_vector().iter().map(|v| v.to_string()));
            fields.extend(s.shape_vel.as_vector().iter().map(|v| v.to_string()));
            fields.push(s.xi.xi_x.to_string());
            fields.push(s.xi.xi_y.to_string());
            fields.push(s.xi.xi_theta.to_string());
            writeln!(w, "{}", fields.join(","))?;
        }
        Ok(())
    }

    /// Parses a store written by [`SampleStore::write_csv`]. Leading `#`
    /// comment lines are ignored.
    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let parse_err = |line: usize, message: &str| Error::CsvParse {
            line,
            message: message.to_string(),
        };
        let mut lines = r
            .lines()
            .enumerate()
            .filter(|(_, l)| !matches!(l, Ok(s) if s.starts_with('#') || s.trim().is_empty()));
        let (hline, header) = lines
            .next()
            .ok_or_else(|| parse_err(0, "empty file"))
            .and_then(|(i, l)| l.map(|s| (i + 1, s)).map_err(|e| parse_err(i + 1, &e.to_string())))?;
        let cols = header.split(',').count();
        if cols < 5 || (cols - 5) % 2 != 0 {
            return Err(parse_err(hline, "header does not match the sample schema"));
        }
        let dim = (cols - 5) / 2;
        if header != Self::csv_header(dim) {
            return Err(parse_err(hline, "unexpected column names"));
        }

        let mut store = SampleStore::new(dim);
        for (i, line) in lines {
            let line = line.map_err(|e| parse_err(i + 1, &e.to_string()))?;
            let values: Vec<f64> = line
                .split(',')
                .map(|f| f.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| parse_err(i + 1, &e.to_string()))?;
            if values.len() != cols {
                return Err(parse_err(i + 1, "wrong field count"));
            }
            let shape = Shape::from_slice(&values[2..2 + dim]).map_err(|e| parse_err(i + 1, &e.to_string()))?;
            let shape_vel =
                ShapeVelocity::from_slice(&values[2 + dim..2 + 2 * dim]).map_err(|e| parse_err(i + 1, &e.to_string()))?;
            store.push(Sample {
                t: values[0],
                phi: values[1],
                shape,
                shape_vel,
                xi: BodyVelocity::new(values[2 + 2 * dim], values[3 + 2 * dim], values[4 + 2 * dim]),
            })?;
        }
        Ok(store)
    }
}

/// Windowed least-squares model with the same query surface as the
/// recursive bank.
#[derive(Debug, Clone)]
pub struct BatchModel {
    field: SmoothedWeightField,
    nominal: Gait,
    shape_dim: usize,
}

impl BatchModel {
    pub fn shape_dim(&self) -> usize {
        self.shape_dim
    }

    pub fn nominal(&self) -> &Gait {
        &self.nominal
    }

    pub fn predict(&self, phi: f64, shape: &Shape, rates: &ShapeVelocity) -> Result<BodyVelocity> {
        if shape.dim() != self.shape_dim || rates.dim() != self.shape_dim {
            return Err(Error::DimensionMismatch {
                expected: self.shape_dim,
                actual: shape.dim(),
            });
        }
        let (nominal, nominal_rate) = self.nominal.nominal_shape(phi);
        let delta = shape.as_vector() - nominal.as_vector();
        let delta_dot = rates.as_vector() - nominal_rate.as_vector();
        let x = build_regressor(&delta, &delta_dot);
        let xi = self.field.eval_mul(phi, &x);
        Ok(BodyVelocity::new(xi[0], xi[1], xi[2]))
    }
}

/// Relative tolerance on singular values when deciding the rank of a
/// window's regressor matrix.
const RANK_TOLERANCE: f64 = 1e-10;

/// Ordinary least squares of the body velocity on the window-local
/// regressor, per window and output, smoothed across windows.
///
/// Solved through an orthogonal factorization; a window with fewer rows
/// than unknowns (or numerically collapsed columns) is reported by index.
pub fn fit_batch(
    samples: &[Sample],
    grid: &PhaseWindowGrid,
    nominal: &Gait,
    smoothing_order: usize,
) -> Result<BatchModel> {
    validate_order(smoothing_order, grid.window_count())?;
    let d = nominal.joint_count();
    let dim = regressor_dim(d);

    let mut window_weights = Vec::with_capacity(grid.window_count());
    for m in 0..grid.window_count() {
        let rows: Vec<&Sample> = samples.iter().filter(|s| grid.covers(m, s.phi)).collect();
        if rows.len() < dim {
            return Err(Error::RankDeficient {
                window: m,
                rows: rows.len(),
                cols: dim,
            });
        }
        let (center_shape, center_rate) = nominal.nominal_shape(grid.center(m));
        let mut x = DMatrix::zeros(rows.len(), dim);
        let mut y = DMatrix::zeros(rows.len(), OUTPUTS);
        for (i, s) in rows.iter().enumerate() {
            let delta = s.shape.as_vector() - center_shape.as_vector();
            let delta_dot = s.shape_vel.as_vector() - center_rate.as_vector();
            let reg = build_regressor(&delta, &delta_dot);
            x.row_mut(i).copy_from(&reg.transpose());
            let c = s.xi.components();
            for k in 0..OUTPUTS {
                y[(i, k)] = c[k];
            }
        }
        let svd = x.svd(true, true);
        let smax = svd.singular_values.max();
        let rank = svd.singular_values.iter().filter(|&&s| s > smax * RANK_TOLERANCE).count();
        if rank < dim {
            return Err(Error::RankDeficient {
                window: m,
                rows: rows.len(),
                cols: dim,
            });
        }
        let w = svd
            .solve(&y, smax * RANK_TOLERANCE)
            .map_err(|e| Error::InvalidParameter(e.to_string()))?;
        window_weights.push(w.transpose()); // outputs x dim
    }

    let field = SmoothedWeightField::fit(&window_weights, smoothing_order)?;
    Ok(BatchModel {
        field,
        nominal: nominal.clone(),
        shape_dim: d,
    })
}

/// Phase-only baseline: per-window mean body velocity, Fourier-smoothed.
#[derive(Debug, Clone)]
pub struct PhaseAverageModel {
    field: SmoothedWeightField,
}

impl PhaseAverageModel {
    /// Baseline prediction; depends on phase alone.
    pub fn predict(&self, phi: f64) -> BodyVelocity {
        let ones = DVector::from_element(1, 1.0);
        let xi = self.field.eval_mul(phi, &ones);
        BodyVelocity::new(xi[0], xi[1], xi[2])
    }
}

/// Fits the phase-averaged baseline from stored samples.
pub fn fit_phase_average(
    samples: &[Sample],
    grid: &PhaseWindowGrid,
    smoothing_order: usize,
) -> Result<PhaseAverageModel> {
    validate_order(smoothing_order, grid.window_count())?;
    let mut means = Vec::with_capacity(grid.window_count());
    for m in 0..grid.window_count() {
        let mut sum = [0.0; OUTPUTS];
        let mut count = 0usize;
        for s in samples.iter().filter(|s| grid.covers(m, s.phi)) {
            let c = s.xi.components();
            for k in 0..OUTPUTS {
                sum[k] += c[k];
            }
            count += 1;
        }
        if count == 0 {
            return Err(Error::UnfittedWindow { window: m });
        }
        means.push(DMatrix::from_fn(OUTPUTS, 1, |k, _| sum[k] / count as f64));
    }
    let field = SmoothedWeightField::fit(&means, smoothing_order)?;
    Ok(PhaseAverageModel { field })
}

/// Recursive form of the phase-averaged baseline: one scalar filter per
/// window and output against the constant regressor, so the online
/// confidence metric needs no stored dataset.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OnlinePhaseAverage {
    grid: PhaseWindowGrid,
    smoothing_order: usize,
    filters: Vec<Vec<RlsFilter>>,
    update_counts: Vec<u64>,
    #[serde(skip, default)]
    smoothed: std::cell::RefCell<Option<SmoothedWeightField>>,
}

impl OnlinePhaseAverage {
    pub fn new(grid: PhaseWindowGrid, rls: RlsConfig, smoothing_order: usize) -> Result<Self> {
        rls.validate()?;
        validate_order(smoothing_order, grid.window_count())?;
        let filters = (0..grid.window_count())
            .map(|_| {
                (0..OUTPUTS)
                    .map(|_| RlsFilter::new(1, rls))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            grid,
            smoothing_order,
            filters,
            update_counts: vec![0; grid.window_count()],
            smoothed: std::cell::RefCell::new(None),
        })
    }

    pub fn is_fitted(&self) -> bool {
        self.update_counts.iter().all(|&c| c > 0)
    }

    pub fn ingest(&mut self, phi: f64, xi: &BodyVelocity) -> Result<()> {
        if !xi.is_finite() {
            return Err(Error::NonFiniteSample);
        }
        let ones = DVector::from_element(1, 1.0);
        let targets = xi.components();
        for m in self.grid.covering_windows(phi) {
            for (k, &t) in targets.iter().enumerate() {
                self.filters[m][k].update(&ones, t)?;
            }
            self.update_counts[m] += 1;
        }
        *self.smoothed.borrow_mut() = None;
        Ok(())
    }

    pub fn predict(&self, phi: f64) -> Result<BodyVelocity> {
        if let Some(w) = self.update_counts.iter().position(|&c| c == 0) {
            return Err(Error::UnfittedWindow { window: w });
        }
        let mut cache = self.smoothed.borrow_mut();
        if cache.is_none() {
            let values: Vec<DMatrix<f64>> = (0..self.grid.window_count())
                .map(|m| DMatrix::from_fn(OUTPUTS, 1, |k, _| self.filters[m][k].weights()[0]))
                .collect();
            *cache = Some(SmoothedWeightField::fit(&values, self.smoothing_order)?);
        }
        let ones = DVector::from_element(1, 1.0);
        let xi = cache.as_ref().expect("just populated").eval_mul(phi, &ones);
        Ok(BodyVelocity::new(xi[0], xi[1], xi[2]))
    }
}
