use crate::error::{Error, Result};
use crate::flows::check_time;

/// Integration direction on `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Data to noise, ascending time.
    Inversion,
    /// Noise to data, descending time.
    Sampling,
}

impl Direction {
    pub fn of(start: f64, end: f64) -> Self {
        if end > start {
            Direction::Inversion
        } else {
            Direction::Sampling
        }
    }

    pub fn sign(self) -> f64 {
        match self {
            Direction::Inversion => 1.0,
            Direction::Sampling => -1.0,
        }
    }
}

/// A strictly monotone schedule of integration times.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    times: Vec<f64>,
    direction: Direction,
}

impl TimeGrid {
    /// `intervals` equal steps from `start` to `end`; the endpoints are
    /// stored exactly as given.
    pub fn uniform(start: f64, end: f64, intervals: usize) -> Result<Self> {
        if intervals == 0 {
            return Err(Error::InvalidGrid("need at least one interval".into()));
        }
        let span = end - start;
        let times = (0..=intervals)
            .map(|i| match i {
                0 => start,
                i if i == intervals => end,
                i => start + span * (i as f64 / intervals as f64),
            })
            .collect();
        Self::from_times(times)
    }

    pub fn from_times(times: Vec<f64>) -> Result<Self> {
        if times.len() < 2 {
            return Err(Error::InvalidGrid("need at least two time points".into()));
        }
        for &t in &times {
            check_time(t).map_err(|_| Error::InvalidGrid(format!("time {t} outside [0, 1]")))?;
        }
        let direction = Direction::of(times[0], times[1]);
        let s = direction.sign();
        if let Some(w) = times.windows(2).find(|w| !((w[1] - w[0]) * s > 0.0)) {
            return Err(Error::InvalidGrid(format!(
                "times not strictly monotone at {} -> {}",
                w[0], w[1]
            )));
        }
        Ok(Self { times, direction })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    /// Number of steps `N`.
    pub fn intervals(&self) -> usize {
        self.times.len() - 1
    }

    pub fn start(&self) -> f64 {
        self.times[0]
    }

    pub fn end(&self) -> f64 {
        *self.times.last().unwrap()
    }

    /// Signed step sizes `t_{i+1} - t_i`.
    pub fn steps(&self) -> impl Iterator<Item = f64> + '_ {
        self.times.windows(2).map(|w| w[1] - w[0])
    }

    /// The same schedule traversed in the opposite direction.
    pub fn reversed(&self) -> Self {
        let mut times = self.times.clone();
        times.reverse();
        Self {
            times,
            direction: match self.direction {
                Direction::Inversion => Direction::Sampling,
                Direction::Sampling => Direction::Inversion,
            },
        }
    }
}
