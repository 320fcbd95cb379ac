use serde::{Deserialize, Serialize};

/// The six supported time discretizations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    ForwardEuler,
    BackwardEuler,
    AdamsBashforth2,
    AdamsMoulton2,
    Bdf2,
    MidpointRk2,
}

impl Scheme {
    pub const ALL: [Scheme; 6] = [
        Scheme::ForwardEuler,
        Scheme::BackwardEuler,
        Scheme::AdamsBashforth2,
        Scheme::AdamsMoulton2,
        Scheme::Bdf2,
        Scheme::MidpointRk2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::ForwardEuler => "fe",
            Scheme::BackwardEuler => "be",
            Scheme::AdamsBashforth2 => "ab2",
            Scheme::AdamsMoulton2 => "am2",
            Scheme::Bdf2 => "bdf2",
            Scheme::MidpointRk2 => "rk2",
        }
    }

    pub fn parse(name: &str) -> Option<Scheme> {
        Scheme::ALL.into_iter().find(|s| s.name() == name)
    }

    pub fn is_explicit(self) -> bool {
        matches!(self, Scheme::ForwardEuler | Scheme::AdamsBashforth2 | Scheme::MidpointRk2)
    }

    pub fn order(self) -> usize {
        match self {
            Scheme::ForwardEuler | Scheme::BackwardEuler => 1,
            _ => 2,
        }
    }

    /// Past states the scheme reads.
    pub fn history_depth(self) -> usize {
        match self {
            Scheme::AdamsBashforth2 | Scheme::Bdf2 => 2,
            _ => 1,
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A scheme with its step size and step count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeId {
    pub scheme: Scheme,
    pub dt: f64,
    pub n_steps: usize,
}

impl SchemeId {
    pub fn new(scheme: Scheme, dt: f64, n_steps: usize) -> Self {
        Self { scheme, dt, n_steps }
    }

    /// Uniform steps covering `[0, final_time]`.
    pub fn over(scheme: Scheme, final_time: f64, n_steps: usize) -> Self {
        Self { scheme, dt: final_time / n_steps as f64, n_steps }
    }

    pub fn final_time(&self) -> f64 {
        self.dt * self.n_steps as f64
    }

    /// Multistep coefficients of step `step` (1-based). AB2 starts with forward
    /// Euler; AM2 and BDF2 start with backward Euler.
    pub fn rule(&self, step: usize) -> StepRule {
        let first = step <= 1;
        match self.scheme {
            Scheme::ForwardEuler | Scheme::MidpointRk2 => StepRule::forward_euler(),
            Scheme::BackwardEuler => StepRule::backward_euler(),
            Scheme::AdamsBashforth2 if first => StepRule::forward_euler(),
            Scheme::AdamsBashforth2 => StepRule { alpha: vec![1.0, -1.0, 0.0], beta: vec![0.0, 1.5, -0.5] },
            Scheme::AdamsMoulton2 if first => StepRule::backward_euler(),
            Scheme::AdamsMoulton2 => StepRule { alpha: vec![1.0, -1.0], beta: vec![0.5, 0.5] },
            Scheme::Bdf2 if first => StepRule::backward_euler(),
            Scheme::Bdf2 => StepRule { alpha: vec![1.0, -4.0 / 3.0, 1.0 / 3.0], beta: vec![2.0 / 3.0, 0.0, 0.0] },
        }
    }
}

/// `M sum_j alpha_j u^{n-j} - dt sum_j beta_j f^{n-j}`, index 0 being the new step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRule {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
}

impl StepRule {
    pub fn forward_euler() -> Self {
        Self { alpha: vec![1.0, -1.0], beta: vec![0.0, 1.0] }
    }

    pub fn backward_euler() -> Self {
        Self { alpha: vec![1.0, -1.0], beta: vec![1.0, 0.0] }
    }

    pub fn is_explicit(&self) -> bool {
        self.beta[0] == 0.0
    }
}
