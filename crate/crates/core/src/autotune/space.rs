use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::AutotuneError;
use crate::leaves::Param;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValueKind {
    Float,
    Int,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Uniform,
    Log,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParameterDecl {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub kind: ValueKind,
    pub scale: Scale,
    pub manual: f64,
}

impl ParameterDecl {
    pub fn float(name: &str, lower: f64, upper: f64, scale: Scale, manual: f64) -> Self {
        Self {
            name: name.into(),
            lower,
            upper,
            kind: ValueKind::Float,
            scale,
            manual,
        }
    }

    pub fn int(name: &str, lower: f64, upper: f64, manual: f64) -> Self {
        Self {
            name: name.into(),
            lower,
            upper,
            kind: ValueKind::Int,
            scale: Scale::Uniform,
            manual,
        }
    }

    pub fn validate(&self) -> Result<(), AutotuneError> {
        let bad = |msg: &str| Err(AutotuneError::InvalidSpace(format!("{}: {msg}", self.name)));
        if !(self.lower.is_finite() && self.upper.is_finite() && self.lower < self.upper) {
            return bad("bounds must be finite with lower < upper");
        }
        if self.scale == Scale::Log && self.lower <= 0.0 {
            return bad("log scale needs a positive lower bound");
        }
        if self.kind == ValueKind::Int && (self.lower.fract() != 0.0 || self.upper.fract() != 0.0) {
            return bad("integer bounds must be integral");
        }
        if !self.contains(self.manual) {
            return bad("manual value lies outside the bounds");
        }
        Ok(())
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.lower && v <= self.upper && (self.kind == ValueKind::Float || v.fract() == 0.0)
    }

    fn warp(&self, v: f64) -> f64 {
        match self.scale {
            Scale::Uniform => v,
            Scale::Log => v.log10(),
        }
    }

    /// Bounds of the sampling domain in warped units; integers are widened
    /// by half a step on each side so every value gets an equal share.
    pub(crate) fn warped_bounds(&self) -> (f64, f64) {
        match self.kind {
            ValueKind::Float => (self.warp(self.lower), self.warp(self.upper)),
            ValueKind::Int => (self.warp(self.lower - 0.5), self.warp(self.upper + 0.5)),
        }
    }

    /// Maps `v` into `[0, 1]` relative to the warped bounds.
    pub(crate) fn normalize(&self, v: f64) -> f64 {
        let (lo, hi) = self.warped_bounds();
        (self.warp(v) - lo) / (hi - lo)
    }

    /// Inverse of [`normalize`](Self::normalize), rounded and clamped to a
    /// legal value.
    pub(crate) fn denormalize(&self, u: f64) -> f64 {
        let (lo, hi) = self.warped_bounds();
        let w = lo + u.clamp(0.0, 1.0) * (hi - lo);
        let v = match self.scale {
            Scale::Uniform => w,
            Scale::Log => 10f64.powf(w),
        };
        let v = match self.kind {
            ValueKind::Float => v,
            ValueKind::Int => v.round(),
        };
        v.clamp(self.lower, self.upper)
    }
}

/// Ordered parameter declarations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SearchSpace {
    pub params: Vec<ParameterDecl>,
}

impl SearchSpace {
    pub fn new(params: Vec<ParameterDecl>) -> Result<Self, AutotuneError> {
        let s = Self { params };
        s.validate()?;
        Ok(s)
    }

    /// The tuning table, plus `k_attractor ∈ [1, 10]` (manual 5).
    pub fn default_space() -> Self {
        use Scale::{Log, Uniform};
        let f = ParameterDecl::float;
        let i = ParameterDecl::int;
        Self {
            params: vec![
                f("m_base", 0.0, 1.0, Uniform, 0.2),
                f("k_geo_col", 0.01, 1.0, Log, 0.03),
                f("k_geo_limit", 0.01, 1.0, Log, 0.3),
                f("k_geo_self", 0.01, 1.0, Log, 0.03),
                f("k_fin_col", 0.01, 1.0, Log, 0.03),
                f("k_fin_limit", 0.01, 1.0, Log, 0.05),
                f("k_fin_self", 0.01, 1.0, Log, 0.03),
                i("exp_geo_col", 1.0, 5.0, 3.0),
                i("exp_geo_limit", 1.0, 5.0, 2.0),
                i("exp_geo_self", 1.0, 5.0, 3.0),
                i("exp_fin_col", 1.0, 5.0, 3.0),
                i("exp_fin_limit", 1.0, 5.0, 3.0),
                i("exp_fin_self", 1.0, 5.0, 3.0),
                f("alpha_b", 0.0, 1.0, Uniform, 0.5),
                f("b_min", 0.0, 1.0, Uniform, 0.01),
                f("b_max", 5.0, 20.0, Uniform, 6.5),
                f("r_shift", 0.01, 0.1, Uniform, 0.05),
                f("v_ex", 1.0, 30.0, Uniform, 15.0),
                f("k_attractor", 1.0, 10.0, Uniform, 5.0),
            ],
        }
    }

    pub fn validate(&self) -> Result<(), AutotuneError> {
        if self.params.is_empty() {
            return Err(AutotuneError::InvalidSpace("no parameters declared".into()));
        }
        for (i, p) in self.params.iter().enumerate() {
            p.validate()?;
            if self.params[..i].iter().any(|q| q.name == p.name) {
                return Err(AutotuneError::InvalidSpace(format!("duplicate parameter `{}`", p.name)));
            }
        }
        Ok(())
    }

    /// Checks that every planner parameter is declared.
    pub fn validate_for_planner(&self) -> Result<(), AutotuneError> {
        self.validate()?;
        for p in Param::ALL {
            if self.get(p.name()).is_none() {
                return Err(AutotuneError::InvalidSpace(format!("missing parameter `{p}`")));
            }
        }
        if let Some(extra) = self.params.iter().find(|d| Param::from_name(&d.name).is_none()) {
            return Err(AutotuneError::InvalidSpace(format!("unknown parameter `{}`", extra.name)));
        }
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&ParameterDecl> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn manual(&self) -> ParameterSet {
        ParameterSet::from_pairs(self.params.iter().map(|p| (p.name.clone(), p.manual)))
    }

    /// Bound and integrality check for every declared parameter.
    pub fn check(&self, set: &ParameterSet) -> Result<(), AutotuneError> {
        for p in &self.params {
            let v = set
                .get(&p.name)
                .ok_or_else(|| AutotuneError::MissingParameter(p.name.clone()))?;
            if !p.contains(v) {
                return Err(AutotuneError::OutOfBounds {
                    name: p.name.clone(),
                    value: v,
                    lower: p.lower,
                    upper: p.upper,
                });
            }
        }
        if let Some(extra) = set.values.keys().find(|k| self.get(k).is_none()) {
            return Err(AutotuneError::UnknownParameter(extra.clone()));
        }
        Ok(())
    }
}

/// A binding of parameter names to values.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParameterSet {
    pub values: BTreeMap<String, f64>,
}

impl ParameterSet {
    pub fn from_pairs(pairs: impl IntoIterator<Item = (String, f64)>) -> Self {
        Self {
            values: pairs.into_iter().collect(),
        }
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.values.get(name).copied()
    }

    pub fn set(&mut self, name: &str, v: f64) {
        self.values.insert(name.to_string(), v);
    }

    /// Values in planner parameter order.
    pub fn to_vector(&self) -> Result<Vec<f64>, AutotuneError> {
        Param::ALL
            .iter()
            .map(|p| {
                self.get(p.name())
                    .ok_or_else(|| AutotuneError::MissingParameter(p.name().to_string()))
            })
            .collect()
    }
}

/// Floats uniform on their interval (log-uniform for log scale), integers
/// uniform on `{lower, ..., upper}`.
pub fn sample_uniform<R: Rng + ?Sized>(space: &SearchSpace, rng: &mut R) -> ParameterSet {
    ParameterSet::from_pairs(space.params.iter().map(|p| {
        let v = match p.kind {
            ValueKind::Int => rng.random_range(p.lower as i64..=p.upper as i64) as f64,
            ValueKind::Float => match p.scale {
                Scale::Uniform => rng.random_range(p.lower..=p.upper),
                Scale::Log => {
                    10f64.powf(rng.random_range(p.lower.log10()..=p.upper.log10())).clamp(p.lower, p.upper)
                }
            },
        };
        (p.name.clone(), v)
    }))
}
