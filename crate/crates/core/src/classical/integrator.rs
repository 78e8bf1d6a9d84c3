//! Adaptive Dormand-Prince 8(5,3) integrator for autonomous systems.
//!
//! Coefficients are Hairer's `dop853` tableau. The error estimate combines the
//! fifth- and third-order embedded solutions as in the reference Fortran code.
//! There is no dense output; callers split long runs into segments and the step
//! size carries over between segments.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// An autonomous vector field `dy/dt = f(y)`.
pub trait VectorField {
    fn dim(&self) -> usize;
    fn eval(&self, y: &[f64], dydt: &mut [f64]);
}

/// Error control and step limits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToleranceSpec {
    pub rtol: f64,
    pub atol: f64,
    /// Smallest step accepted before giving up.
    pub h_min: f64,
    /// Upper bound on any single step.
    pub h_max: f64,
    /// Steps allowed per `advance` call.
    pub max_steps: u64,
}

impl Default for ToleranceSpec {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-10,
            h_min: 1e-12,
            h_max: 1.0,
            max_steps: 100_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntegrateError {
    #[error("step size underflow at t={t_reached}")]
    StepUnderflow { t_reached: f64 },
    #[error("non-finite state at t={t_reached}")]
    NonFinite { t_reached: f64 },
    #[error("step budget exhausted at t={t_reached}")]
    MaxSteps { t_reached: f64 },
}

impl IntegrateError {
    pub fn t_reached(&self) -> f64 {
        match *self {
            IntegrateError::StepUnderflow { t_reached }
            | IntegrateError::NonFinite { t_reached }
            | IntegrateError::MaxSteps { t_reached } => t_reached,
        }
    }

    fn shifted(self, offset: f64) -> Self {
        match self {
            IntegrateError::StepUnderflow { t_reached } => IntegrateError::StepUnderflow {
                t_reached: t_reached + offset,
            },
            IntegrateError::NonFinite { t_reached } => IntegrateError::NonFinite {
                t_reached: t_reached + offset,
            },
            IntegrateError::MaxSteps { t_reached } => IntegrateError::MaxSteps {
                t_reached: t_reached + offset,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepStats {
    pub accepted: u64,
    pub rejected: u64,
    pub evaluations: u64,
}

const STAGES: usize = 12;

// Stage nodes. Every field here is autonomous, so only the tableau check reads them.
#[cfg(test)]
const C: [f64; STAGES] = [
    0.0,
    0.526001519587677318785587544488e-01,
    0.789002279381515978178381316732e-01,
    0.118350341907227396726757197510,
    0.281649658092772603273242802490,
    0.333333333333333333333333333333,
    0.25,
    0.307692307692307692307692307692,
    0.651282051282051282051282051282,
    0.6,
    0.857142857142857142857142857142,
    1.0,
];

// Lower-triangular stage matrix, row s holds the weights of stages 0..s.
const A: [[f64; STAGES]; STAGES] = {
    let mut a = [[0.0; STAGES]; STAGES];
    a[1][0] = 5.26001519587677318785587544488e-2;

    a[2][0] = 1.97250569845378994544595329183e-2;
    a[2][1] = 5.91751709536136983633785987549e-2;

    a[3][0] = 2.95875854768068491816892993775e-2;
    a[3][2] = 8.87627564304205475450678981324e-2;

    a[4][0] = 2.41365134159266685502369798665e-1;
    a[4][2] = -8.84549479328286085344864962717e-1;
    a[4][3] = 9.24834003261792003115737966543e-1;

    a[5][0] = 3.7037037037037037037037037037e-2;
    a[5][3] = 1.70828608729473871279604482173e-1;
    a[5][4] = 1.25467687566822425016691814123e-1;

    a[6][0] = 3.7109375e-2;
    a[6][3] = 1.70252211019544039314978060272e-1;
    a[6][4] = 6.02165389804559606850219397283e-2;
    a[6][5] = -1.7578125e-2;

    a[7][0] = 3.70920001185047927108779319836e-2;
    a[7][3] = 1.70383925712239993810214054705e-1;
    a[7][4] = 1.07262030446373284651809199168e-1;
    a[7][5] = -1.53194377486244017527936158236e-2;
    a[7][6] = 8.27378916381402288758473766002e-3;

    a[8][0] = 6.24110958716075717114429577812e-1;
    a[8][3] = -3.36089262944694129406857109825;
    a[8][4] = -8.68219346841726006818189891453e-1;
    a[8][5] = 2.75920996994467083049415600797e1;
    a[8][6] = 2.01540675504778934086186788979e1;
    a[8][7] = -4.34898841810699588477366255144e1;

    a[9][0] = 4.77662536438264365890433908527e-1;
    a[9][3] = -2.48811461997166764192642586468;
    a[9][4] = -5.90290826836842996371446475743e-1;
    a[9][5] = 2.12300514481811942347288949897e1;
    a[9][6] = 1.52792336328824235832596922938e1;
    a[9][7] = -3.32882109689848629194453265587e1;
    a[9][8] = -2.03312017085086261358222928593e-2;

    a[10][0] = -9.3714243008598732571704021658e-1;
    a[10][3] = 5.18637242884406370830023853209;
    a[10][4] = 1.09143734899672957818500254654;
    a[10][5] = -8.14978701074692612513997267357;
    a[10][6] = -1.85200656599969598641566180701e1;
    a[10][7] = 2.27394870993505042818970056734e1;
    a[10][8] = 2.49360555267965238987089396762;
    a[10][9] = -3.0467644718982195003823669022;

    a[11][0] = 2.27331014751653820792359768449;
    a[11][3] = -1.05344954667372501984066689879e1;
    a[11][4] = -2.00087205822486249909675718444;
    a[11][5] = -1.79589318631187989172765950534e1;
    a[11][6] = 2.79488845294199600508499808837e1;
    a[11][7] = -2.85899827713502369474065508674;
    a[11][8] = -8.87285693353062954433549289258;
    a[11][9] = 1.23605671757943030647266201528e1;
    a[11][10] = 6.43392746015763530355970484046e-1;
    a
};

const B: [f64; STAGES] = [
    5.42937341165687622380535766363e-2,
    0.0,
    0.0,
    0.0,
    0.0,
    4.45031289275240888144113950566,
    1.89151789931450038304281599044,
    -5.8012039600105847814672114227,
    3.1116436695781989440891606237e-1,
    -1.52160949662516078556178806805e-1,
    2.01365400804030348374776537501e-1,
    4.47106157277725905176885569043e-2,
];

const E3: [f64; STAGES] = {
    let mut e = B;
    e[0] -= 0.244094488188976377952755905512;
    e[8] -= 0.733846688281611857341361741547;
    e[11] -= 0.220588235294117647058823529412e-1;
    e
};

const E5: [f64; STAGES] = [
    0.1312004499419488073250102996e-1,
    0.0,
    0.0,
    0.0,
    0.0,
    -0.1225156446376204440720569753e+1,
    -0.4957589496572501915214079952,
    0.1664377182454986536961530415e+1,
    -0.3503288487499736816886487290,
    0.3341791187130174790297318841,
    0.8192320648511571246570742613e-1,
    -0.2235530786388629525884427845e-1,
];

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.333;
const MAX_FACTOR: f64 = 6.0;

/// Stateful stepper; keeps its step size and derivative cache across calls.
#[derive(Debug, Clone)]
pub struct Dop853 {
    tol: ToleranceSpec,
    dim: usize,
    h: Option<f64>,
    k: Vec<Vec<f64>>,
    y_stage: Vec<f64>,
    y_new: Vec<f64>,
    f_new: Vec<f64>,
    fsal_valid: bool,
    stats: StepStats,
}

impl Dop853 {
    pub fn new(dim: usize, tol: ToleranceSpec) -> Self {
        Self {
            tol,
            dim,
            h: None,
            k: vec![vec![0.0; dim]; STAGES],
            y_stage: vec![0.0; dim],
            y_new: vec![0.0; dim],
            f_new: vec![0.0; dim],
            fsal_valid: false,
            stats: StepStats::default(),
        }
    }

    pub fn stats(&self) -> StepStats {
        self.stats
    }

    /// Forget the cached derivative; required after `y` is edited externally.
    pub fn invalidate(&mut self) {
        self.fsal_valid = false;
    }

    /// Advances `y` by `duration`. After every accepted step `observer` may edit
    /// `y` in place; it returns `true` when it did so.
    pub fn advance<F, O>(
        &mut self,
        field: &F,
        y: &mut [f64],
        duration: f64,
        mut observer: O,
    ) -> Result<(), IntegrateError>
    where
        F: VectorField + ?Sized,
        O: FnMut(&mut [f64]) -> bool,
    {
        assert_eq!(y.len(), self.dim);
        assert_eq!(field.dim(), self.dim);
        if duration <= 0.0 {
            return Ok(());
        }
        if !self.fsal_valid {
            field.eval(y, &mut self.k[0]);
            self.stats.evaluations += 1;
            self.fsal_valid = true;
        }
        let mut h = match self.h {
            Some(h) => h,
            None => self.initial_step(field, y),
        };
        let mut t = 0.0;
        let mut steps = 0u64;
        let mut last_rejected = false;
        while t < duration {
            if steps >= self.tol.max_steps {
                return Err(IntegrateError::MaxSteps { t_reached: t });
            }
            steps += 1;
            let remaining = duration - t;
            // Land exactly on the segment end without inflating the next step.
            let (h_try, clamped) = if h >= remaining { (remaining, true) } else { (h, false) };
            let err = self.trial_step(field, y, h_try);
            if !err.is_finite() {
                // Treat blow-up inside a stage as a rejection with a hard cut.
                h = h_try * MIN_FACTOR;
                self.stats.rejected += 1;
                if h < self.tol.h_min {
                    return Err(IntegrateError::NonFinite { t_reached: t });
                }
                last_rejected = true;
                continue;
            }
            if err <= 1.0 {
                self.stats.accepted += 1;
                t = if clamped { duration } else { t + h_try };
                y.copy_from_slice(&self.y_new);
                std::mem::swap(&mut self.k[0], &mut self.f_new);
                if y.iter().any(|v| !v.is_finite()) {
                    return Err(IntegrateError::NonFinite { t_reached: t });
                }
                let mut factor = if err == 0.0 {
                    MAX_FACTOR
                } else {
                    (SAFETY * err.powf(-1.0 / 8.0)).clamp(MIN_FACTOR, MAX_FACTOR)
                };
                if last_rejected {
                    factor = factor.min(1.0);
                }
                last_rejected = false;
                if !clamped || h_try * factor > h {
                    h = (h_try * factor).min(self.tol.h_max);
                }
                if observer(y) {
                    field.eval(y, &mut self.k[0]);
                    self.stats.evaluations += 1;
                }
            } else {
                self.stats.rejected += 1;
                last_rejected = true;
                h = h_try * (SAFETY * err.powf(-1.0 / 8.0)).max(MIN_FACTOR);
                if h < self.tol.h_min {
                    return Err(IntegrateError::StepUnderflow { t_reached: t });
                }
            }
        }
        self.h = Some(h);
        Ok(())
    }

    /// Runs one trial step of size `h` from `y` (with `k[0] = f(y)`), leaving the
    /// candidate in `y_new` and `f(y_new)` in `f_new`. Returns the scaled error norm.
    fn trial_step<F: VectorField + ?Sized>(&mut self, field: &F, y: &[f64], h: f64) -> f64 {
        let n = self.dim;
        for s in 1..STAGES {
            for i in 0..n {
                let mut acc = 0.0;
                for (j, kj) in self.k[..s].iter().enumerate() {
                    let a = A[s][j];
                    if a != 0.0 {
                        acc += a * kj[i];
                    }
                }
                self.y_stage[i] = y[i] + h * acc;
            }
            let (_, rest) = self.k.split_at_mut(s);
            field.eval(&self.y_stage, &mut rest[0]);
        }
        self.stats.evaluations += (STAGES - 1) as u64;

        let mut err5 = 0.0;
        let mut err3 = 0.0;
        for i in 0..n {
            let mut acc = 0.0;
            let mut e5 = 0.0;
            let mut e3 = 0.0;
            for s in 0..STAGES {
                let ks = self.k[s][i];
                acc += B[s] * ks;
                e5 += E5[s] * ks;
                e3 += E3[s] * ks;
            }
            let y_next = y[i] + h * acc;
            self.y_new[i] = y_next;
            let scale = self.tol.atol + self.tol.rtol * y[i].abs().max(y_next.abs());
            err5 += (e5 / scale).powi(2);
            err3 += (e3 / scale).powi(2);
        }
        field.eval(&self.y_new, &mut self.f_new);
        self.stats.evaluations += 1;
        if err5 == 0.0 && err3 == 0.0 {
            return 0.0;
        }
        let denom = err5 + 0.01 * err3;
        h.abs() * err5 / (denom * n as f64).sqrt()
    }

    /// Hairer's starting-step heuristic.
    fn initial_step<F: VectorField + ?Sized>(&mut self, field: &F, y: &[f64]) -> f64 {
        let n = self.dim;
        let scale: Vec<f64> = y.iter().map(|v| self.tol.atol + self.tol.rtol * v.abs()).collect();
        let rms = |v: &[f64]| (v.iter().zip(&scale).map(|(a, s)| (a / s).powi(2)).sum::<f64>() / n as f64).sqrt();
        let d0 = rms(y);
        let d1 = rms(&self.k[0]);
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        for i in 0..n {
            self.y_stage[i] = y[i] + h0 * self.k[0][i];
        }
        field.eval(&self.y_stage, &mut self.f_new);
        self.stats.evaluations += 1;
        let diff: Vec<f64> = self.f_new.iter().zip(&self.k[0]).map(|(a, b)| a - b).collect();
        let d2 = rms(&diff) / h0;
        let h1 = if d1 <= 1e-15 && d2 <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(1.0 / 8.0)
        };
        (100.0 * h0).min(h1).min(self.tol.h_max)
    }
}

/// Integrates `field` from `y` over `duration` with a fresh stepper.
pub fn integrate_field<F: VectorField + ?Sized>(
    field: &F,
    y: &mut [f64],
    duration: f64,
    tol: ToleranceSpec,
) -> Result<StepStats, IntegrateError> {
    let mut stepper = Dop853::new(field.dim(), tol);
    stepper.advance(field, y, duration, |_| false)?;
    Ok(stepper.stats())
}

/// Like [`integrate_field`] but reports failures with `offset` added to the
/// reached time.
pub(crate) fn advance_offset<F: VectorField + ?Sized, O: FnMut(&mut [f64]) -> bool>(
    stepper: &mut Dop853,
    field: &F,
    y: &mut [f64],
    duration: f64,
    offset: f64,
    observer: O,
) -> Result<(), IntegrateError> {
    stepper
        .advance(field, y, duration, observer)
        .map_err(|e| e.shifted(offset))
}
