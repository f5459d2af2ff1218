use crate::kv::{self, Entry, KvError};

/// Thresholds for the reference detector. Percent-valued fields are
/// percentage points of volumetric moisture; window fields count samples.
#[derive(Clone, Debug, PartialEq)]
pub struct DetectorParams {
    /// Minimum rise within `rise_window` samples that opens a candidate event.
    pub rise_threshold: f64,
    pub rise_window: usize,
    pub net_gain_threshold: f64,
    /// Samples after onset searched for the plateau.
    pub plateau_window: usize,
    pub spike_revert_window: usize,
    /// Shifts lasting at least this many samples are persistent.
    pub shift_min_duration: usize,
    pub deviation_threshold: f64,
    /// Samples whose median forms the pre-spike baseline.
    pub baseline_lookback: usize,
    pub gap_factor: f64,
    /// Re-examine candidates at irrigation onsets and drop them.
    pub suppress_near_irrigation: bool,
}

impl Default for DetectorParams {
    fn default() -> Self {
        Self {
            rise_threshold: 1.5,
            rise_window: 4,
            net_gain_threshold: 1.0,
            plateau_window: 16,
            spike_revert_window: 4,
            shift_min_duration: 96,
            deviation_threshold: 3.0,
            baseline_lookback: 4,
            gap_factor: crate::ingest::DEFAULT_GAP_FACTOR,
            suppress_near_irrigation: true,
        }
    }
}

impl DetectorParams {
    pub const KEYS: [&'static str; 10] = [
        "rise_threshold",
        "rise_window",
        "net_gain_threshold",
        "plateau_window",
        "spike_revert_window",
        "shift_min_duration",
        "deviation_threshold",
        "baseline_lookback",
        "gap_factor",
        "suppress_near_irrigation",
    ];

    pub fn from_kv(text: &str) -> Result<Self, KvError> {
        let mut p = Self::default();
        for e in kv::parse(text)? {
            p.apply(&e)?;
        }
        p.validate()?;
        Ok(p)
    }

    /// Sets one field by name. Returns `UnknownKey` for names outside [`Self::KEYS`].
    pub fn apply(&mut self, e: &Entry) -> Result<(), KvError> {
        match e.key.as_str() {
            "rise_threshold" => self.rise_threshold = e.parse()?,
            "rise_window" => self.rise_window = e.parse()?,
            "net_gain_threshold" => self.net_gain_threshold = e.parse()?,
            "plateau_window" => self.plateau_window = e.parse()?,
            "spike_revert_window" => self.spike_revert_window = e.parse()?,
            "shift_min_duration" => self.shift_min_duration = e.parse()?,
            "deviation_threshold" => self.deviation_threshold = e.parse()?,
            "baseline_lookback" => self.baseline_lookback = e.parse()?,
            "gap_factor" => self.gap_factor = e.parse()?,
            "suppress_near_irrigation" => self.suppress_near_irrigation = e.parse()?,
            _ => return Err(e.unknown()),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), KvError> {
        let positive = [
            ("rise_threshold", self.rise_threshold),
            ("net_gain_threshold", self.net_gain_threshold),
            ("deviation_threshold", self.deviation_threshold),
            ("gap_factor", self.gap_factor),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(KvError::Invalid(format!("{name} must be > 0")));
            }
        }
        let counts = [
            ("rise_window", self.rise_window),
            ("plateau_window", self.plateau_window),
            ("spike_revert_window", self.spike_revert_window),
            ("shift_min_duration", self.shift_min_duration),
            ("baseline_lookback", self.baseline_lookback),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(KvError::Invalid(format!("{name} must be > 0")));
            }
        }
        if self.spike_revert_window >= self.shift_min_duration {
            return Err(KvError::Invalid(
                "spike_revert_window must be below shift_min_duration".into(),
            ));
        }
        Ok(())
    }

    /// Samples after onset inspected for the post-plateau decline.
    pub(crate) fn shape_horizon(&self) -> usize {
        (self.shift_min_duration / 2).max(self.plateau_window)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlagitParams {
    pub abs_min: f64,
    pub abs_max: f64,
    /// Absolute change between consecutive samples that raises a flag.
    pub derivative_threshold: f64,
}

impl Default for FlagitParams {
    fn default() -> Self {
        Self {
            abs_min: 0.0,
            abs_max: 60.0,
            derivative_threshold: 5.0,
        }
    }
}

impl FlagitParams {
    pub const KEYS: [&'static str; 3] = ["abs_min", "abs_max", "derivative_threshold"];

    pub fn from_kv(text: &str) -> Result<Self, KvError> {
        let mut p = Self::default();
        for e in kv::parse(text)? {
            p.apply(&e)?;
        }
        p.validate()?;
        Ok(p)
    }

    pub fn apply(&mut self, e: &Entry) -> Result<(), KvError> {
        match e.key.as_str() {
            "abs_min" => self.abs_min = e.parse()?,
            "abs_max" => self.abs_max = e.parse()?,
            "derivative_threshold" => self.derivative_threshold = e.parse()?,
            _ => return Err(e.unknown()),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), KvError> {
        if self.abs_min.is_nan() || self.abs_max.is_nan() || self.abs_min >= self.abs_max {
            return Err(KvError::Invalid("abs_min must be below abs_max".into()));
        }
        if !(self.derivative_threshold.is_finite() && self.derivative_threshold > 0.0) {
            return Err(KvError::Invalid("derivative_threshold must be > 0".into()));
        }
        Ok(())
    }
}
