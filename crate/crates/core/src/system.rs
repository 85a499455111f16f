//! Power-system data model: generators, load profile and the frequency
//! security threshold, plus operating points over a fixed generator fleet.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Multiplier applied to the largest generator rating to obtain the big-M
/// constant used by the argmax and dispatch-feature encodings.
pub const GAMMA_MULTIPLIER: f64 = 1.01;

/// One synchronous generator. Powers in MW, time in scheduling steps unless
/// the field says seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    pub id: String,
    pub p_min: f64,
    pub p_max: f64,
    /// MW per step.
    pub ramp_up: f64,
    /// MW per step.
    pub ramp_down: f64,
    pub min_up: u32,
    pub min_down: u32,
    /// Cost per committed step.
    pub cost_fixed: f64,
    /// Cost per MWh.
    pub cost_marginal: f64,
    /// Cost per start-up.
    pub cost_startup: f64,
    /// Inertia constant in seconds on the machine's own base.
    pub inertia_h: f64,
    /// Governor droop in per-unit on the machine's own base.
    pub droop_r: f64,
    /// Governor/turbine time constant in seconds.
    pub governor_t: f64,
    pub mva_base: f64,
}

impl GeneratorSpec {
    fn violations(&self, out: &mut Vec<String>) {
        let id = &self.id;
        let finite = [
            ("p_min", self.p_min),
            ("p_max", self.p_max),
            ("ramp_up", self.ramp_up),
            ("ramp_down", self.ramp_down),
            ("cost_fixed", self.cost_fixed),
            ("cost_marginal", self.cost_marginal),
            ("cost_startup", self.cost_startup),
            ("inertia_h", self.inertia_h),
            ("droop_r", self.droop_r),
            ("governor_t", self.governor_t),
            ("mva_base", self.mva_base),
        ];
        for (name, v) in finite {
            if !v.is_finite() {
                out.push(format!("generator {id}: {name} is not finite"));
            }
        }
        if !(self.p_min >= 0.0 && self.p_min <= self.p_max) {
            out.push(format!(
                "generator {id}: require 0 <= p_min <= p_max (p_min = {}, p_max = {})",
                self.p_min, self.p_max
            ));
        }
        if self.ramp_up < 0.0 || self.ramp_down < 0.0 {
            out.push(format!("generator {id}: ramp limits must be >= 0"));
        }
        if self.min_up < 1 || self.min_down < 1 {
            out.push(format!("generator {id}: min_up and min_down must be >= 1"));
        }
        if self.inertia_h <= 0.0 {
            out.push(format!("generator {id}: inertia_h must be > 0"));
        }
        if self.droop_r <= 0.0 {
            out.push(format!("generator {id}: droop_r must be > 0"));
        }
        if self.governor_t <= 0.0 {
            out.push(format!("generator {id}: governor_t must be > 0"));
        }
        if self.mva_base <= 0.0 {
            out.push(format!("generator {id}: mva_base must be > 0"));
        }
        if self.cost_fixed < 0.0 || self.cost_marginal < 0.0 || self.cost_startup < 0.0 {
            out.push(format!("generator {id}: costs must be >= 0"));
        }
    }
}

/// Single-bus system description. Immutable once validated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    pub f_nominal_hz: f64,
    /// Minimum permissible post-contingency frequency nadir.
    pub nadir_limit_hz: f64,
    /// Load damping in per-unit on the system base.
    pub load_damping_d: f64,
    pub system_mva_base: f64,
    pub load_profile_mw: Vec<f64>,
    pub generators: Vec<GeneratorSpec>,
}

/// Parse and validate a JSON system spec.
pub fn load_system_spec(text: &str) -> Result<SystemSpec> {
    let spec: SystemSpec = serde_json::from_str(text).map_err(Error::from_json_parse)?;
    spec.validate()?;
    Ok(spec)
}

/// Big-M constant strictly above every feasible generator output.
pub fn big_m_gamma(spec: &SystemSpec) -> f64 {
    GAMMA_MULTIPLIER * spec.max_p_max()
}

impl SystemSpec {
    /// Five-unit, four-step demo system bundled with the crate.
    pub fn demo() -> Self {
        load_system_spec(include_str!("../data/demo_system.json"))
            .expect("bundled demo spec is valid")
    }

    pub fn num_generators(&self) -> usize {
        self.generators.len()
    }

    pub fn horizon(&self) -> usize {
        self.load_profile_mw.len()
    }

    pub fn max_p_max(&self) -> f64 {
        self.generators
            .iter()
            .map(|g| g.p_max)
            .fold(0.0, f64::max)
    }

    pub fn total_capacity(&self) -> f64 {
        self.generators.iter().map(|g| g.p_max).sum()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }

    /// Check every invariant, reporting all violations at once.
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if self.generators.is_empty() {
            errs.push("at least one generator is required".to_string());
        }
        for g in &self.generators {
            g.violations(&mut errs);
        }
        for (i, a) in self.generators.iter().enumerate() {
            if self.generators[..i].iter().any(|b| b.id == a.id) {
                errs.push(format!("duplicate generator id {}", a.id));
            }
        }
        if self.load_profile_mw.is_empty() {
            errs.push("load_profile_mw must contain at least one step".to_string());
        }
        let cap = self.total_capacity();
        for (t, &load) in self.load_profile_mw.iter().enumerate() {
            if !load.is_finite() || load < 0.0 {
                errs.push(format!("load_profile_mw[{t}] must be finite and >= 0"));
            } else if load > cap {
                errs.push(format!(
                    "infeasible load: load_profile_mw[{t}] = {load} exceeds total capacity {cap}"
                ));
            }
        }
        if !(self.f_nominal_hz.is_finite() && self.f_nominal_hz > 0.0) {
            errs.push("f_nominal_hz must be finite and > 0".to_string());
        }
        if !(self.nadir_limit_hz < self.f_nominal_hz) {
            errs.push(format!(
                "nadir_limit_hz ({}) must be below f_nominal_hz ({})",
                self.nadir_limit_hz, self.f_nominal_hz
            ));
        }
        if !(self.load_damping_d.is_finite() && self.load_damping_d >= 0.0) {
            errs.push("load_damping_d must be finite and >= 0".to_string());
        }
        if !(self.system_mva_base.is_finite() && self.system_mva_base > 0.0) {
            errs.push("system_mva_base must be finite and > 0".to_string());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(errs))
        }
    }

    /// Inertia constant of generator `g` rebased to the system MVA base.
    pub fn rebased_inertia(&self, g: usize) -> f64 {
        let gen = &self.generators[g];
        gen.inertia_h * gen.mva_base / self.system_mva_base
    }

    /// Governor gain 1/R of generator `g` on the system MVA base.
    pub fn rebased_governor_gain(&self, g: usize) -> f64 {
        let gen = &self.generators[g];
        gen.mva_base / (gen.droop_r * self.system_mva_base)
    }
}

/// Commitment and dispatch of every generator at one instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub u: Vec<bool>,
    pub p: Vec<f64>,
}

impl OperatingPoint {
    pub fn committed_count(&self) -> usize {
        self.u.iter().filter(|&&on| on).count()
    }

    /// Index of the largest output, lowest index on ties.
    pub fn largest_unit(&self) -> usize {
        let mut best = 0;
        for (g, &p) in self.p.iter().enumerate() {
            if p > self.p[best] {
                best = g;
            }
        }
        best
    }

    pub fn total_output(&self) -> f64 {
        self.p.iter().sum()
    }

    pub fn validate(&self, spec: &SystemSpec) -> Result<()> {
        let n = spec.num_generators();
        if self.u.len() != n || self.p.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: self.u.len().min(self.p.len()),
            });
        }
        let mut errs = Vec::new();
        for (g, gen) in spec.generators.iter().enumerate() {
            let p = self.p[g];
            if !p.is_finite() {
                errs.push(format!("generator {}: dispatch is not finite", gen.id));
            } else if self.u[g] {
                if p < gen.p_min - 1e-9 || p > gen.p_max + 1e-9 {
                    errs.push(format!(
                        "generator {}: dispatch {p} outside [{}, {}]",
                        gen.id, gen.p_min, gen.p_max
                    ));
                }
            } else if p != 0.0 {
                errs.push(format!("generator {}: offline but dispatched {p}", gen.id));
            }
        }
        if self.committed_count() == 0 {
            errs.push("no generator committed".to_string());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(errs))
        }
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub fn gen(id: &str, p_min: f64, p_max: f64) -> GeneratorSpec {
        GeneratorSpec {
            id: id.to_string(),
            p_min,
            p_max,
            ramp_up: p_max,
            ramp_down: p_max,
            min_up: 1,
            min_down: 1,
            cost_fixed: 10.0,
            cost_marginal: 20.0,
            cost_startup: 50.0,
            inertia_h: 5.0,
            droop_r: 0.05,
            governor_t: 2.0,
            mva_base: p_max,
        }
    }

    pub fn three_gen_spec() -> SystemSpec {
        SystemSpec {
            f_nominal_hz: 50.0,
            nadir_limit_hz: 49.2,
            load_damping_d: 5.0,
            system_mva_base: 1000.0,
            load_profile_mw: vec![150.0, 250.0, 400.0, 300.0],
            generators: vec![gen("g1", 20.0, 100.0), gen("g2", 50.0, 300.0), gen("g3", 30.0, 200.0)],
        }
    }

    #[test]
    fn loads_three_generator_spec() {
        let spec = three_gen_spec();
        let parsed = load_system_spec(&spec.to_json()).unwrap();
        assert_eq!(parsed.num_generators(), 3);
        assert_eq!(parsed.horizon(), 4);
        assert_eq!(parsed, spec);
    }

    #[test]
    fn rejects_inverted_limits_naming_generator() {
        let mut spec = three_gen_spec();
        spec.generators[1].p_min = 400.0;
        let err = load_system_spec(&spec.to_json()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("g2"), "{msg}");
        assert!(msg.contains("p_min"), "{msg}");
    }

    #[test]
    fn rejects_load_above_capacity() {
        let mut spec = three_gen_spec();
        spec.load_profile_mw[2] = 601.0;
        let msg = spec.validate().unwrap_err().to_string();
        assert!(msg.contains("infeasible load"), "{msg}");
        assert!(msg.contains("load_profile_mw[2]"), "{msg}");
    }

    #[test]
    fn reports_every_violation() {
        let mut spec = three_gen_spec();
        spec.generators[0].droop_r = 0.0;
        spec.generators[2].inertia_h = -1.0;
        spec.nadir_limit_hz = 51.0;
        match spec.validate().unwrap_err() {
            Error::Validation(v) => assert_eq!(v.len(), 3, "{v:?}"),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn unknown_key_is_parse_error() {
        let text = spec_text_with_extra_key();
        match load_system_spec(&text).unwrap_err() {
            Error::Parse { message, line, .. } => {
                assert!(message.contains("unknown field"), "{message}");
                assert!(line > 0);
            }
            e => panic!("unexpected {e}"),
        }
    }

    fn spec_text_with_extra_key() -> String {
        let mut v: serde_json::Value = serde_json::from_str(&three_gen_spec().to_json()).unwrap();
        v["generators"][0]["colour"] = serde_json::json!("red");
        serde_json::to_string_pretty(&v).unwrap()
    }

    #[test]
    fn gamma_examples() {
        let mut spec = three_gen_spec();
        assert!((big_m_gamma(&spec) - 303.0).abs() < 1e-12);
        spec.generators.truncate(1);
        spec.generators[0].p_max = 50.0;
        assert!((big_m_gamma(&spec) - 50.5).abs() < 1e-12);
        let mut spec = three_gen_spec();
        for g in &mut spec.generators {
            g.p_max = 100.0;
        }
        assert!((big_m_gamma(&spec) - 101.0).abs() < 1e-12);
    }

    #[test]
    fn largest_unit_ties_to_lowest_index() {
        let op = OperatingPoint {
            u: vec![true, true, false],
            p: vec![200.0, 200.0, 0.0],
        };
        assert_eq!(op.largest_unit(), 0);
    }

    #[test]
    fn operating_point_checks() {
        let spec = three_gen_spec();
        let ok = OperatingPoint {
            u: vec![true, true, false],
            p: vec![50.0, 100.0, 0.0],
        };
        ok.validate(&spec).unwrap();
        let off_dispatched = OperatingPoint {
            u: vec![true, false, false],
            p: vec![50.0, 10.0, 0.0],
        };
        assert!(off_dispatched.validate(&spec).is_err());
        let none = OperatingPoint {
            u: vec![false; 3],
            p: vec![0.0; 3],
        };
        assert!(none.validate(&spec).is_err());
    }

    #[test]
    fn demo_spec_is_valid() {
        let spec = SystemSpec::demo();
        assert!(spec.num_generators() >= 3);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn json_round_trip(p_max in proptest::collection::vec(10.0f64..500.0, 1..6),
                               frac in 0.0f64..1.0) {
                let gens: Vec<_> = p_max.iter().enumerate()
                    .map(|(i, &p)| gen(&format!("g{i}"), p * 0.2, p)).collect();
                let cap: f64 = p_max.iter().sum();
                let spec = SystemSpec {
                    f_nominal_hz: 50.0,
                    nadir_limit_hz: 49.2,
                    load_damping_d: 1.0,
                    system_mva_base: 100.0,
                    load_profile_mw: vec![cap * frac, cap * frac * 0.5],
                    generators: gens,
                };
                let back = load_system_spec(&spec.to_json()).unwrap();
                prop_assert_eq!(&back, &spec);
                let gamma = big_m_gamma(&spec);
                for g in &spec.generators {
                    prop_assert!(gamma > g.p_max);
                }
            }
        }
    }
}
