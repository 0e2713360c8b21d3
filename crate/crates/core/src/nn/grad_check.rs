use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::params::{ParamId, ParamStore};
use super::tape::{Tape, Var};
use super::NnError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckOptions {
    pub eps: f64,
    /// Coordinates sampled per parameter tensor; smaller tensors are
    /// checked exhaustively.
    pub coords_per_param: usize,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            eps: 1e-5,
            coords_per_param: 16,
            seed: 0,
        }
    }
}

/// One checked coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradSample {
    pub param: ParamId,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

impl GradSample {
    /// `|ga - gn| / max(1e-8, |ga| + |gn|)`
    pub fn relative_error(&self) -> f64 {
        (self.analytic - self.numeric).abs() / (self.analytic.abs() + self.numeric.abs()).max(1e-8)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub worst_param: String,
    pub coords_checked: usize,
    /// Objective value at the unperturbed parameters.
    pub loss: f64,
    pub eps: f64,
    pub samples: Vec<GradSample>,
}

impl GradCheckReport {
    /// Absolute error a central difference can carry from rounding the
    /// objective alone: a few ulps of the loss divided by the step.
    pub fn roundoff_bound(&self) -> f64 {
        4.0 * f64::EPSILON * self.loss.abs().max(1.0) / self.eps
    }

    /// Samples whose error exceeds `rtol * (|ga| + |gn|) + atol`.
    pub fn violations(&self, rtol: f64, atol: f64) -> impl Iterator<Item = &GradSample> {
        self.samples
            .iter()
            .filter(move |s| (s.analytic - s.numeric).abs() > rtol * (s.analytic.abs() + s.numeric.abs()) + atol)
    }
}

fn evaluate<F, E>(store: &ParamStore, f: &F) -> Result<f64, E>
where
    F: Fn(&mut Tape<'_>) -> Result<Var, E>,
    E: From<NnError>,
{
    let mut tape = Tape::new(store);
    let loss = f(&mut tape)?;
    Ok(tape.value(loss).data()[0])
}

/// Compares reverse-mode gradients of `f` with central differences.
///
/// The error per coordinate is `|ga - gn| / max(1e-8, |ga| + |gn|)`.
/// Objectives that record active dropout are rejected.
pub fn grad_check<F, E>(store: &ParamStore, f: F, opts: GradCheckOptions) -> Result<GradCheckReport, E>
where
    F: Fn(&mut Tape<'_>) -> Result<Var, E>,
    E: From<NnError>,
{
    let (analytic, loss) = {
        let mut tape = Tape::new(store);
        let loss = f(&mut tape)?;
        if tape.is_stochastic() {
            return Err(NnError::StochasticObjective.into());
        }
        let value = tape.value(loss).data()[0];
        (tape.backward(loss)?, value)
    };

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut work = store.clone();
    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        worst_param: String::new(),
        coords_checked: 0,
        loss,
        eps: opts.eps,
        samples: Vec::new(),
    };
    for id in store.ids() {
        let len = store.value(id).len();
        let coords: Vec<usize> = if len <= opts.coords_per_param {
            (0..len).collect()
        } else {
            let mut c = sample(&mut rng, len, opts.coords_per_param).into_vec();
            c.sort_unstable();
            c
        };
        for c in coords {
            let orig = work.value(id).data()[c];
            work.value_mut(id).data_mut()[c] = orig + opts.eps;
            let plus = evaluate(&work, &f)?;
            work.value_mut(id).data_mut()[c] = orig - opts.eps;
            let minus = evaluate(&work, &f)?;
            work.value_mut(id).data_mut()[c] = orig;

            let numeric = (plus - minus) / (2.0 * opts.eps);
            let exact = analytic.get(id).map_or(0.0, |g| g.data()[c]);
            let sample = GradSample {
                param: id,
                index: c,
                analytic: exact,
                numeric,
            };
            let err = sample.relative_error();
            report.samples.push(sample);
            report.coords_checked += 1;
            if err > report.max_relative_error {
                report.max_relative_error = err;
                report.worst_param = format!("{}[{c}]", store.name(id));
            }
        }
    }
    Ok(report)
}
