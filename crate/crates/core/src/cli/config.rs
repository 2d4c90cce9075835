//! TOML scenario files.
//!
//! Sections `[plant]`, `[controller]`, `[observer]`, `[disturbance]`, `[sim]`
//! and `[output]`. Unknown keys are rejected; optional keys fall back to the
//! model defaults and [`to_toml`] writes every key back out explicitly.

use std::fmt;
use std::ops::Range;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use toml::Spanned;

use crate::dynamics::{AccParams, DisturbanceSignal, SegwayParams};
use crate::sim::{
    ClassKKind, ControllerConfig, Fallback, ObjectiveKind, ObserverSettings, PlantConfig, Scenario, SimSettings,
    Variant,
};

/// One problem found in a scenario file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub line: Option<usize>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub source_name: String,
    pub diagnostics: Vec<Diagnostic>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, d) in self.diagnostics.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            match d.line {
                Some(line) => write!(f, "{}:{}: {}", self.source_name, line, d.message)?,
                None => write!(f, "{}: {}", self.source_name, d.message)?,
            }
        }
        Ok(())
    }
}

impl std::error::Error for ConfigError {}

/// A parsed file: the scenario plus where its output should go.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioFile {
    pub scenario: Scenario,
    pub output_dir: Option<PathBuf>,
}

type F = Option<Spanned<f64>>;
type S = Option<Spanned<String>>;
type V = Option<Spanned<Vec<f64>>>;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    plant: Option<Spanned<RawPlant>>,
    controller: Option<Spanned<RawController>>,
    observer: Option<Spanned<RawObserver>>,
    disturbance: Option<Spanned<RawDisturbance>>,
    sim: Option<Spanned<RawSim>>,
    output: Option<Spanned<RawOutput>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPlant {
    model: S,
    gravity: F,
    initial_state: V,
    // cruise control
    mass: F,
    f0: F,
    f1: F,
    f2: F,
    lead_accel: F,
    desired_speed: F,
    time_headway: F,
    input_bound_fraction: F,
    // segway
    m0: F,
    m: F,
    length: F,
    j0: F,
    b_t: F,
    radius: F,
    k_m: F,
    incline: F,
    goal_state: V,
    input_bound: F,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawController {
    variant: S,
    objective: S,
    alpha_kind: S,
    alpha: F,
    lambda: F,
    relax_penalty: F,
    input_weight: F,
    epsilon: F,
    ecbf_poles: V,
    lqr_q: V,
    lqr_r: F,
    fallback: S,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawObserver {
    k_b: F,
    b_h: F,
    e_b0: F,
    b_hat0: F,
    noise_std: F,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDisturbance {
    kind: S,
    amplitude: F,
    angular_frequency: F,
    phase: F,
    value: F,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSim {
    dt: F,
    t_final: F,
    seed: Option<Spanned<i64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    name: S,
    dir: S,
}

struct Ctx<'a> {
    text: &'a str,
    diagnostics: Vec<Diagnostic>,
}

impl<'a> Ctx<'a> {
    fn line_of(&self, span: &Range<usize>) -> usize {
        let end = span.start.min(self.text.len());
        self.text[..end].bytes().filter(|&b| b == b'\n').count() + 1
    }

    fn error_at(&mut self, span: Option<Range<usize>>, message: String) {
        let line = span.map(|s| self.line_of(&s));
        self.diagnostics.push(Diagnostic { line, message });
    }

    fn missing(&mut self, key: &str) {
        self.diagnostics.push(Diagnostic { line: None, message: format!("missing required key `{key}`") });
    }

    fn required<T: Clone>(&mut self, key: &str, value: &Option<Spanned<T>>) -> Option<T> {
        match value {
            Some(v) => Some(v.get_ref().clone()),
            None => {
                self.missing(key);
                None
            }
        }
    }

    fn or<T: Clone>(&self, value: &Option<Spanned<T>>, default: T) -> T {
        value.as_ref().map_or(default, |v| v.get_ref().clone())
    }

    fn check(&mut self, key: &str, value: &F, ok: impl Fn(f64) -> bool, requirement: &str) {
        if let Some(v) = value {
            let x = *v.get_ref();
            if !x.is_finite() || !ok(x) {
                self.error_at(Some(v.span()), format!("`{key}` must be {requirement}, got {x}"));
            }
        }
    }

    fn array<const N: usize>(&mut self, key: &str, value: &V, default: [f64; N]) -> [f64; N] {
        match value {
            None => default,
            Some(v) => match <[f64; N]>::try_from(v.get_ref().as_slice()) {
                Ok(a) => a,
                Err(_) => {
                    let n = v.get_ref().len();
                    self.error_at(Some(v.span()), format!("`{key}` must have {N} entries, got {n}"));
                    default
                }
            },
        }
    }

    fn choice<T: Copy>(&mut self, key: &str, value: &S, options: &[(&str, T)]) -> Option<T> {
        let v = value.as_ref()?;
        match options.iter().find(|(name, _)| *name == v.get_ref()) {
            Some((_, t)) => Some(*t),
            None => {
                let allowed: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
                self.error_at(
                    Some(v.span()),
                    format!("unknown {key} `{}`; expected one of: {}", v.get_ref(), allowed.join(", ")),
                );
                None
            }
        }
    }

    fn reject(&mut self, section: &str, model: &str, keys: &[(&str, Option<Range<usize>>)]) {
        for (key, span) in keys {
            if let Some(span) = span {
                self.error_at(Some(span.clone()), format!("`{section}.{key}` does not apply to model {model}"));
            }
        }
    }
}

fn span_of<T>(v: &Option<Spanned<T>>) -> Option<Range<usize>> {
    v.as_ref().map(|s| s.span())
}

const VARIANTS: &[(&str, Variant)] = &[
    ("nominal", Variant::Nominal),
    ("issf", Variant::Issf),
    ("dob-robust", Variant::DobRobust),
    ("dob-robust-ecbf", Variant::DobRobustEcbf),
];
const OBJECTIVES: &[(&str, ObjectiveKind)] = &[
    ("track-baseline", ObjectiveKind::TrackBaseline),
    ("reject-disturbance", ObjectiveKind::RejectDisturbance),
    ("weighted-input-only", ObjectiveKind::WeightedInputOnly),
];
const CLASS_K: &[(&str, ClassKKind)] = &[("linear", ClassKKind::Linear), ("cubic", ClassKKind::Cubic)];
const FALLBACKS: &[(&str, Fallback)] =
    &[("hold-previous", Fallback::HoldPrevious), ("saturate-safe", Fallback::SaturateSafe)];

#[derive(Clone, Copy, PartialEq)]
enum Model {
    Acc,
    Segway,
}
const MODELS: &[(&str, Model)] = &[("acc", Model::Acc), ("segway", Model::Segway)];

fn name_of<T: PartialEq + Copy>(options: &[(&'static str, T)], value: T) -> &'static str {
    options.iter().find(|(_, t)| *t == value).map(|(n, _)| *n).unwrap_or("?")
}

/// Parses scenario text. `source_name` only labels diagnostics.
pub fn parse_scenario_str(text: &str, source_name: &str) -> Result<ScenarioFile, ConfigError> {
    let fail = |diagnostics| ConfigError { source_name: source_name.to_string(), diagnostics };
    let raw: RawFile = match toml::from_str(text) {
        Ok(raw) => raw,
        Err(e) => {
            let mut ctx = Ctx { text, diagnostics: Vec::new() };
            ctx.error_at(e.span(), e.message().trim().to_string());
            return Err(fail(ctx.diagnostics));
        }
    };
    let mut ctx = Ctx { text, diagnostics: Vec::new() };
    let scenario = resolve(&mut ctx, &raw);
    match scenario {
        Some(file) if ctx.diagnostics.is_empty() => Ok(file),
        _ => Err(fail(ctx.diagnostics)),
    }
}

/// Reads and parses a scenario file.
pub fn parse_scenario(path: &Path) -> Result<ScenarioFile, ConfigError> {
    let name = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
        source_name: name.clone(),
        diagnostics: vec![Diagnostic { line: None, message: format!("cannot read file: {e}") }],
    })?;
    parse_scenario_str(&text, &name)
}

fn resolve(ctx: &mut Ctx<'_>, raw: &RawFile) -> Option<ScenarioFile> {
    let default_plant = RawPlant::default();
    let plant = raw.plant.as_ref().map(|s| s.get_ref()).unwrap_or(&default_plant);
    let ctl = raw.controller.as_ref().map(|s| s.get_ref());
    let default_ctl = RawController::default();
    let ctl = ctl.unwrap_or(&default_ctl);
    let sim = raw.sim.as_ref().map(|s| s.get_ref());
    let default_sim = RawSim::default();
    let sim = sim.unwrap_or(&default_sim);

    let model = match ctx.required("plant.model", &plant.model) {
        Some(_) => ctx.choice("plant model", &plant.model, MODELS),
        None => None,
    };
    let variant = match ctx.required("controller.variant", &ctl.variant) {
        Some(_) => ctx.choice("controller variant", &ctl.variant, VARIANTS),
        None => None,
    };

    // [sim]
    let dt = ctx.required("sim.dt", &sim.dt);
    let t_final = ctx.required("sim.t_final", &sim.t_final);
    ctx.check("sim.dt", &sim.dt, |v| v > 0.0, "positive [s]");
    ctx.check("sim.t_final", &sim.t_final, |v| v > 0.0, "positive [s]");
    if let (Some(dt), Some(tf), Some(span)) = (dt, t_final, span_of(&sim.t_final)) {
        if dt > 0.0 && tf < dt {
            ctx.error_at(Some(span), format!("`sim.t_final` ({tf}) must be at least `sim.dt` ({dt})"));
        }
    }
    let seed = match &sim.seed {
        Some(s) if *s.get_ref() < 0 => {
            ctx.error_at(Some(s.span()), format!("`sim.seed` must be non-negative, got {}", s.get_ref()));
            0
        }
        Some(s) => *s.get_ref() as u64,
        None => 0,
    };

    // [plant]
    let plant_config = model.map(|m| resolve_plant(ctx, plant, m));

    // [controller]
    let positive = |v: f64| v > 0.0;
    ctx.check("controller.alpha", &ctl.alpha, positive, "positive");
    ctx.check("controller.lambda", &ctl.lambda, positive, "positive [1/s]");
    ctx.check("controller.relax_penalty", &ctl.relax_penalty, positive, "positive");
    ctx.check("controller.input_weight", &ctl.input_weight, positive, "positive");
    ctx.check("controller.epsilon", &ctl.epsilon, positive, "positive");
    ctx.check("controller.lqr_r", &ctl.lqr_r, positive, "positive");
    let objective = ctx.choice("objective", &ctl.objective, OBJECTIVES);
    let alpha_kind = ctx.choice("class-K function", &ctl.alpha_kind, CLASS_K).unwrap_or(ClassKKind::Linear);
    let fallback = ctx.choice("fallback", &ctl.fallback, FALLBACKS).unwrap_or_default();
    if variant == Some(Variant::Issf) {
        ctx.required("controller.epsilon", &ctl.epsilon);
    }
    if let Some(poles) = &ctl.ecbf_poles {
        if poles.get_ref().iter().any(|p| !(*p < 0.0)) {
            ctx.error_at(Some(poles.span()), "`controller.ecbf_poles` must all be negative real numbers".into());
        }
    }
    if let Some(q) = &ctl.lqr_q {
        if q.get_ref().iter().any(|v| !(*v >= 0.0)) {
            ctx.error_at(Some(q.span()), "`controller.lqr_q` entries must be non-negative".into());
        }
    }

    let controller = match model {
        Some(Model::Acc) => {
            ctx.reject(
                "controller",
                "acc",
                &[
                    ("ecbf_poles", span_of(&ctl.ecbf_poles)),
                    ("lqr_q", span_of(&ctl.lqr_q)),
                    ("lqr_r", span_of(&ctl.lqr_r)),
                ],
            );
            variant.map(|variant| ControllerConfig {
                variant,
                objective: objective.unwrap_or(ObjectiveKind::WeightedInputOnly),
                alpha_kind,
                alpha: ctx.or(&ctl.alpha, 1.0),
                lambda: Some(ctx.or(&ctl.lambda, 5.0)),
                relax_penalty: ctx.or(&ctl.relax_penalty, 100.0),
                input_weight: ctx.or(&ctl.input_weight, 1.0),
                epsilon: ctl.epsilon.as_ref().map(|v| *v.get_ref()),
                ecbf_poles: None,
                lqr_q: None,
                lqr_r: None,
                fallback,
            })
        }
        Some(Model::Segway) => {
            ctx.reject("controller", "segway", &[("lambda", span_of(&ctl.lambda))]);
            variant.map(|variant| ControllerConfig {
                variant,
                objective: objective.unwrap_or(ObjectiveKind::TrackBaseline),
                alpha_kind,
                alpha: ctx.or(&ctl.alpha, 1.0),
                lambda: None,
                relax_penalty: ctx.or(&ctl.relax_penalty, 100.0),
                input_weight: ctx.or(&ctl.input_weight, 1.0),
                epsilon: ctl.epsilon.as_ref().map(|v| *v.get_ref()),
                ecbf_poles: Some(ctx.or(&ctl.ecbf_poles, vec![-2.0, -4.0])),
                lqr_q: Some(ctx.or(&ctl.lqr_q, vec![10.0, 1.0, 10.0, 1.0])),
                lqr_r: Some(ctx.or(&ctl.lqr_r, 1.0)),
                fallback,
            })
        }
        None => None,
    };

    // [observer]
    let needs_observer = variant.is_some_and(|v| v.uses_observer())
        || objective == Some(ObjectiveKind::RejectDisturbance);
    let observer = match (&raw.observer, needs_observer) {
        (None, true) => {
            for key in ["observer.k_b", "observer.b_h", "observer.e_b0"] {
                ctx.missing(key);
            }
            None
        }
        (None, false) => None,
        (Some(obs), _) => {
            let obs = obs.get_ref();
            ctx.check("observer.k_b", &obs.k_b, |v| v > 0.0, "positive [1/s]");
            ctx.check("observer.b_h", &obs.b_h, |v| v >= 0.0, "non-negative");
            ctx.check("observer.e_b0", &obs.e_b0, |v| v >= 0.0, "non-negative");
            ctx.check("observer.noise_std", &obs.noise_std, |v| v >= 0.0, "non-negative");
            ctx.check("observer.b_hat0", &obs.b_hat0, |_| true, "finite");
            let k_b = ctx.required("observer.k_b", &obs.k_b);
            let b_h = ctx.required("observer.b_h", &obs.b_h);
            let e_b0 = ctx.required("observer.e_b0", &obs.e_b0);
            match (k_b, b_h, e_b0) {
                (Some(k_b), Some(b_h), Some(e_b0)) => Some(ObserverSettings {
                    k_b,
                    b_h,
                    e_b0,
                    b_hat0: ctx.or(&obs.b_hat0, 0.0),
                    noise_std: ctx.or(&obs.noise_std, 0.0),
                }),
                _ => None,
            }
        }
    };

    // [disturbance]
    let disturbance = match &raw.disturbance {
        None => DisturbanceSignal::zero(),
        Some(d) => resolve_disturbance(ctx, d.get_ref()),
    };
    if model == Some(Model::Segway) && !disturbance.is_zero() {
        let span = raw.disturbance.as_ref().map(|d| d.span());
        ctx.error_at(span, "the segway disturbance comes from `plant.incline`; use `kind = \"none\"`".into());
    }

    // [output]
    let default_output = RawOutput::default();
    let output = raw.output.as_ref().map(|o| o.get_ref()).unwrap_or(&default_output);
    let name = ctx.or(&output.name, "scenario".to_string());
    if name.is_empty() || name.contains(['/', '\\']) {
        ctx.error_at(span_of(&output.name), "`output.name` must be a non-empty file stem".into());
    }
    let output_dir = output.dir.as_ref().map(|d| PathBuf::from(d.get_ref()));

    let scenario = Scenario {
        name,
        plant: plant_config?,
        controller: controller?,
        observer,
        disturbance,
        sim: SimSettings { dt: dt?, t_final: t_final?, seed },
    };
    if ctx.diagnostics.is_empty() {
        if let Err(e) = scenario.validate() {
            ctx.error_at(None, e.to_string());
        }
    }
    Some(ScenarioFile { scenario, output_dir })
}

fn resolve_plant(ctx: &mut Ctx<'_>, p: &RawPlant, model: Model) -> PlantConfig {
    let positive = |v: f64| v > 0.0;
    let non_negative = |v: f64| v >= 0.0;
    ctx.check("plant.gravity", &p.gravity, positive, "positive [m/s²]");
    match model {
        Model::Acc => {
            ctx.reject(
                "plant",
                "acc",
                &[
                    ("m0", span_of(&p.m0)),
                    ("m", span_of(&p.m)),
                    ("length", span_of(&p.length)),
                    ("j0", span_of(&p.j0)),
                    ("b_t", span_of(&p.b_t)),
                    ("radius", span_of(&p.radius)),
                    ("k_m", span_of(&p.k_m)),
                    ("incline", span_of(&p.incline)),
                    ("goal_state", span_of(&p.goal_state)),
                    ("input_bound", span_of(&p.input_bound)),
                ],
            );
            ctx.check("plant.mass", &p.mass, positive, "positive [kg]");
            ctx.check("plant.f0", &p.f0, non_negative, "non-negative [N]");
            ctx.check("plant.f1", &p.f1, non_negative, "non-negative [N·s/m]");
            ctx.check("plant.f2", &p.f2, non_negative, "non-negative [N·s²/m²]");
            ctx.check("plant.lead_accel", &p.lead_accel, |_| true, "finite [m/s²]");
            ctx.check("plant.desired_speed", &p.desired_speed, positive, "positive [m/s]");
            ctx.check("plant.time_headway", &p.time_headway, positive, "positive [s]");
            ctx.check("plant.input_bound_fraction", &p.input_bound_fraction, positive, "positive");
            let d = AccParams::default();
            PlantConfig::Acc(AccParams {
                mass: ctx.or(&p.mass, d.mass),
                f0: ctx.or(&p.f0, d.f0),
                f1: ctx.or(&p.f1, d.f1),
                f2: ctx.or(&p.f2, d.f2),
                gravity: ctx.or(&p.gravity, d.gravity),
                lead_accel: ctx.or(&p.lead_accel, d.lead_accel),
                desired_speed: ctx.or(&p.desired_speed, d.desired_speed),
                time_headway: ctx.or(&p.time_headway, d.time_headway),
                input_bound_fraction: ctx.or(&p.input_bound_fraction, d.input_bound_fraction),
                initial_state: ctx.array("plant.initial_state", &p.initial_state, d.initial_state),
            })
        }
        Model::Segway => {
            ctx.reject(
                "plant",
                "segway",
                &[
                    ("mass", span_of(&p.mass)),
                    ("f0", span_of(&p.f0)),
                    ("f1", span_of(&p.f1)),
                    ("f2", span_of(&p.f2)),
                    ("lead_accel", span_of(&p.lead_accel)),
                    ("desired_speed", span_of(&p.desired_speed)),
                    ("time_headway", span_of(&p.time_headway)),
                    ("input_bound_fraction", span_of(&p.input_bound_fraction)),
                ],
            );
            for (key, v, unit) in [
                ("plant.m0", &p.m0, "[kg]"),
                ("plant.m", &p.m, "[kg]"),
                ("plant.length", &p.length, "[m]"),
                ("plant.j0", &p.j0, "[kg·m²]"),
                ("plant.radius", &p.radius, "[m]"),
                ("plant.input_bound", &p.input_bound, "[V]"),
            ] {
                ctx.check(key, v, positive, &format!("positive {unit}"));
            }
            ctx.check("plant.b_t", &p.b_t, non_negative, "non-negative [N·s]");
            ctx.check("plant.k_m", &p.k_m, |v| v != 0.0, "non-zero [N·m/V]");
            ctx.check("plant.incline", &p.incline, |v| v.abs() < std::f64::consts::FRAC_PI_2, "within (−π/2, π/2) [rad]");
            let d = SegwayParams::default();
            PlantConfig::Segway(SegwayParams {
                m0: ctx.or(&p.m0, d.m0),
                m: ctx.or(&p.m, d.m),
                length: ctx.or(&p.length, d.length),
                j0: ctx.or(&p.j0, d.j0),
                b_t: ctx.or(&p.b_t, d.b_t),
                radius: ctx.or(&p.radius, d.radius),
                k_m: ctx.or(&p.k_m, d.k_m),
                gravity: ctx.or(&p.gravity, d.gravity),
                incline: ctx.or(&p.incline, d.incline),
                initial_state: ctx.array("plant.initial_state", &p.initial_state, d.initial_state),
                goal_state: ctx.array("plant.goal_state", &p.goal_state, d.goal_state),
                input_bound: ctx.or(&p.input_bound, d.input_bound),
            })
        }
    }
}

fn resolve_disturbance(ctx: &mut Ctx<'_>, d: &RawDisturbance) -> DisturbanceSignal {
    #[derive(Clone, Copy)]
    enum Kind {
        None,
        Sinusoid,
        Constant,
    }
    let kinds = [("none", Kind::None), ("sinusoid", Kind::Sinusoid), ("constant", Kind::Constant)];
    if ctx.required("disturbance.kind", &d.kind).is_none() {
        return DisturbanceSignal::zero();
    }
    let Some(kind) = ctx.choice("disturbance kind", &d.kind, &kinds) else {
        return DisturbanceSignal::zero();
    };
    for (key, v) in [
        ("disturbance.amplitude", &d.amplitude),
        ("disturbance.angular_frequency", &d.angular_frequency),
        ("disturbance.phase", &d.phase),
        ("disturbance.value", &d.value),
    ] {
        ctx.check(key, v, |_| true, "finite");
    }
    let sinusoid_keys = [
        ("amplitude", span_of(&d.amplitude)),
        ("angular_frequency", span_of(&d.angular_frequency)),
        ("phase", span_of(&d.phase)),
    ];
    match kind {
        Kind::None => {
            ctx.reject("disturbance", "kind none", &sinusoid_keys);
            ctx.reject("disturbance", "kind none", &[("value", span_of(&d.value))]);
            DisturbanceSignal::zero()
        }
        Kind::Constant => {
            ctx.reject("disturbance", "kind constant", &sinusoid_keys);
            match ctx.required("disturbance.value", &d.value) {
                Some(value) => DisturbanceSignal::Constant { value },
                None => DisturbanceSignal::zero(),
            }
        }
        Kind::Sinusoid => {
            ctx.reject("disturbance", "kind sinusoid", &[("value", span_of(&d.value))]);
            let a = ctx.required("disturbance.amplitude", &d.amplitude);
            let w = ctx.required("disturbance.angular_frequency", &d.angular_frequency);
            match (a, w) {
                (Some(a), Some(w)) => DisturbanceSignal::sinusoid(a, w, ctx.or(&d.phase, 0.0)),
                _ => DisturbanceSignal::zero(),
            }
        }
    }
}

fn num(v: f64) -> String {
    // Debug formatting is the shortest representation that parses back exactly.
    let s = format!("{v:?}");
    if s.contains(['.', 'e', 'E', 'i', 'N']) {
        s
    } else {
        format!("{s}.0")
    }
}

fn list(v: &[f64]) -> String {
    let items: Vec<String> = v.iter().map(|x| num(*x)).collect();
    format!("[{}]", items.join(", "))
}

/// Writes a scenario back in file form with every key explicit.
pub fn to_toml(scenario: &Scenario, output_dir: Option<&Path>) -> String {
    let mut out = String::new();
    let mut line = |s: String| {
        out.push_str(&s);
        out.push('\n');
    };
    line("[plant]".into());
    match &scenario.plant {
        PlantConfig::Acc(p) => {
            line("model = \"acc\"".into());
            line(format!("mass = {}                  # [kg]", num(p.mass)));
            line(format!("f0 = {}                    # [N]", num(p.f0)));
            line(format!("f1 = {}                    # [N·s/m]", num(p.f1)));
            line(format!("f2 = {}                    # [N·s²/m²]", num(p.f2)));
            line(format!("gravity = {}               # [m/s²]", num(p.gravity)));
            line(format!("lead_accel = {}            # [m/s²]", num(p.lead_accel)));
            line(format!("desired_speed = {}         # [m/s]", num(p.desired_speed)));
            line(format!("time_headway = {}          # [s]", num(p.time_headway)));
            line(format!("input_bound_fraction = {}  # of m·g", num(p.input_bound_fraction)));
            line(format!("initial_state = {}         # [v_l m/s, v_f m/s, D m]", list(&p.initial_state)));
        }
        PlantConfig::Segway(p) => {
            line("model = \"segway\"".into());
            line(format!("m0 = {}             # [kg]", num(p.m0)));
            line(format!("m = {}              # [kg]", num(p.m)));
            line(format!("length = {}         # [m]", num(p.length)));
            line(format!("j0 = {}             # [kg·m²]", num(p.j0)));
            line(format!("b_t = {}            # [N·s]", num(p.b_t)));
            line(format!("radius = {}         # [m]", num(p.radius)));
            line(format!("k_m = {}            # [N·m/V]", num(p.k_m)));
            line(format!("gravity = {}        # [m/s²]", num(p.gravity)));
            line(format!("incline = {}        # [rad]", num(p.incline)));
            line(format!("initial_state = {}  # [p m, ṗ m/s, θ rad, θ̇ rad/s]", list(&p.initial_state)));
            line(format!("goal_state = {}", list(&p.goal_state)));
            line(format!("input_bound = {}    # [V]", num(p.input_bound)));
        }
    }
    let c = &scenario.controller;
    line(String::new());
    line("[controller]".into());
    line(format!("variant = \"{}\"", c.variant.as_str()));
    line(format!("objective = \"{}\"", name_of(OBJECTIVES, c.objective)));
    line(format!("alpha_kind = \"{}\"", name_of(CLASS_K, c.alpha_kind)));
    line(format!("alpha = {}", num(c.alpha)));
    if let Some(l) = c.lambda {
        line(format!("lambda = {}  # [1/s]", num(l)));
    }
    line(format!("relax_penalty = {}", num(c.relax_penalty)));
    line(format!("input_weight = {}", num(c.input_weight)));
    if let Some(e) = c.epsilon {
        line(format!("epsilon = {}", num(e)));
    }
    if let Some(p) = &c.ecbf_poles {
        line(format!("ecbf_poles = {}", list(p)));
    }
    if let Some(q) = &c.lqr_q {
        line(format!("lqr_q = {}", list(q)));
    }
    if let Some(r) = c.lqr_r {
        line(format!("lqr_r = {}", num(r)));
    }
    line(format!("fallback = \"{}\"", name_of(FALLBACKS, c.fallback)));
    if let Some(o) = &scenario.observer {
        line(String::new());
        line("[observer]".into());
        line(format!("k_b = {}  # [1/s]", num(o.k_b)));
        line(format!("b_h = {}", num(o.b_h)));
        line(format!("e_b0 = {}", num(o.e_b0)));
        line(format!("b_hat0 = {}", num(o.b_hat0)));
        line(format!("noise_std = {}", num(o.noise_std)));
    }
    line(String::new());
    line("[disturbance]".into());
    match &scenario.disturbance {
        DisturbanceSignal::Sinusoid { amplitude, angular_frequency, phase } => {
            line("kind = \"sinusoid\"".into());
            line(format!("amplitude = {}          # input units", num(*amplitude)));
            line(format!("angular_frequency = {}  # [rad/s]", num(*angular_frequency)));
            line(format!("phase = {}              # [rad]", num(*phase)));
        }
        DisturbanceSignal::Constant { value } => {
            line("kind = \"constant\"".into());
            line(format!("value = {}", num(*value)));
        }
        DisturbanceSignal::Custom { .. } => line("kind = \"none\"  # custom signals have no file form".into()),
    }
    line(String::new());
    line("[sim]".into());
    line(format!("dt = {}       # [s]", num(scenario.sim.dt)));
    line(format!("t_final = {}  # [s]", num(scenario.sim.t_final)));
    line(format!("seed = {}", scenario.sim.seed));
    line(String::new());
    line("[output]".into());
    line(format!("name = {}", toml::Value::String(scenario.name.clone())));
    if let Some(dir) = output_dir {
        line(format!("dir = {}", toml::Value::String(dir.display().to_string())));
    }
    out
}
