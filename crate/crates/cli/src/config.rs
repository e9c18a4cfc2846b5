//! Flat key-value scenario configuration: built-in defaults, then the config
//! file, then `--set` overrides. Every key the user supplies must be consumed
//! by the scenario, so typos fail loudly instead of being ignored.

use std::cell::RefCell;
use std::collections::BTreeSet;
use std::path::Path;

use heatball_core::heatball::{SpaceTimeOrigin, TestFunction};
use heatball_core::kernels::{own_heat_kernel, KernelField, KernelKind};
use heatball_core::models::ModelSpacetime;
use toml::{Table, Value};

use crate::error::CliError;

pub struct Params {
    table: Table,
    user_keys: BTreeSet<String>,
    used: RefCell<BTreeSet<String>>,
}

fn parse_table(text: &str, source: &str) -> Result<Table, CliError> {
    let table: Table = text
        .parse()
        .map_err(|e| CliError::Config(format!("{source}: {e}")))?;
    for (key, value) in &table {
        check_flat(key, value, source)?;
    }
    Ok(table)
}

fn check_flat(key: &str, value: &Value, source: &str) -> Result<(), CliError> {
    match value {
        Value::Table(_) => Err(CliError::Config(format!(
            "{source}: `{key}` is a table; configs are flat key-value files"
        ))),
        Value::Array(items)
            if items
                .iter()
                .any(|v| matches!(v, Value::Array(_) | Value::Table(_))) =>
        {
            Err(CliError::Config(format!(
                "{source}: `{key}` must be a flat array"
            )))
        }
        _ => Ok(()),
    }
}

/// Parses the right-hand side of `--set key=value`. Bare words that are not
/// valid TOML values are taken as strings, so `--set model=sphere` works.
fn parse_override(item: &str) -> Result<(String, Value), CliError> {
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("--set expects key=value, got `{item}`")))?;
    let key = key.trim();
    if key.is_empty() {
        return Err(CliError::Config(format!(
            "--set has an empty key in `{item}`"
        )));
    }
    let raw = raw.trim();
    let value = match format!("v = {raw}").parse::<Table>() {
        Ok(mut t) => t.remove("v").expect("parsed table has the key"),
        Err(_) => Value::String(raw.to_string()),
    };
    check_flat(key, &value, "--set")?;
    Ok((key.to_string(), value))
}

impl Params {
    pub fn load(
        defaults: &str,
        file: Option<&Path>,
        overrides: &[String],
    ) -> Result<Self, CliError> {
        let mut table = parse_table(defaults, "built-in defaults")?;
        let mut user_keys = BTreeSet::new();
        if let Some(path) = file {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            for (k, v) in parse_table(&text, &path.display().to_string())? {
                user_keys.insert(k.clone());
                table.insert(k, v);
            }
        }
        for item in overrides {
            let (k, v) = parse_override(item)?;
            user_keys.insert(k.clone());
            table.insert(k, v);
        }
        Ok(Self {
            table,
            user_keys,
            used: RefCell::new(BTreeSet::new()),
        })
    }

    fn raw(&self, key: &str) -> Option<&Value> {
        self.used.borrow_mut().insert(key.to_string());
        self.table.get(key)
    }

    fn missing(key: &str) -> CliError {
        CliError::Config(format!("`{key}`: missing value"))
    }

    pub fn has(&self, key: &str) -> bool {
        self.table.contains_key(key)
    }

    pub fn f64(&self, key: &str) -> Result<f64, CliError> {
        match self.raw(key) {
            Some(Value::Float(x)) => Ok(*x),
            Some(Value::Integer(i)) => Ok(*i as f64),
            Some(other) => Err(CliError::Config(format!(
                "`{key}`: expected a number, got {other}"
            ))),
            None => Err(Self::missing(key)),
        }
    }

    pub fn positive(&self, key: &str) -> Result<f64, CliError> {
        let x = self.f64(key)?;
        if x > 0.0 && x.is_finite() {
            Ok(x)
        } else {
            Err(CliError::Config(format!(
                "`{key}`: must be positive, got {x}"
            )))
        }
    }

    pub fn usize(&self, key: &str) -> Result<usize, CliError> {
        match self.raw(key) {
            Some(Value::Integer(i)) if *i >= 0 => Ok(*i as usize),
            Some(other) => Err(CliError::Config(format!(
                "`{key}`: expected a nonnegative integer, got {other}"
            ))),
            None => Err(Self::missing(key)),
        }
    }

    pub fn i32(&self, key: &str) -> Result<i32, CliError> {
        match self.raw(key) {
            Some(Value::Integer(i)) => i32::try_from(*i)
                .map_err(|_| CliError::Config(format!("`{key}`: {i} is out of range"))),
            Some(other) => Err(CliError::Config(format!(
                "`{key}`: expected an integer, got {other}"
            ))),
            None => Err(Self::missing(key)),
        }
    }

    pub fn str(&self, key: &str) -> Result<String, CliError> {
        match self.raw(key) {
            Some(Value::String(s)) => Ok(s.clone()),
            Some(other) => Err(CliError::Config(format!(
                "`{key}`: expected a string, got {other}"
            ))),
            None => Err(Self::missing(key)),
        }
    }

    pub fn f64_list(&self, key: &str) -> Result<Vec<f64>, CliError> {
        let bad = |v: &Value| CliError::Config(format!("`{key}`: expected numbers, got {v}"));
        match self.raw(key) {
            Some(Value::Array(items)) => items
                .iter()
                .map(|v| match v {
                    Value::Float(x) => Ok(*x),
                    Value::Integer(i) => Ok(*i as f64),
                    other => Err(bad(other)),
                })
                .collect(),
            Some(Value::Float(x)) => Ok(vec![*x]),
            Some(Value::Integer(i)) => Ok(vec![*i as f64]),
            Some(other) => Err(bad(other)),
            None => Err(Self::missing(key)),
        }
    }

    /// A strictly increasing list of positive values.
    pub fn grid(&self, key: &str) -> Result<Vec<f64>, CliError> {
        let g = self.f64_list(key)?;
        if g.is_empty() {
            return Err(CliError::Config(format!("`{key}`: empty list")));
        }
        if g.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
            return Err(CliError::Config(format!(
                "`{key}`: values must be positive"
            )));
        }
        if g.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CliError::Config(format!(
                "`{key}`: values must increase strictly"
            )));
        }
        Ok(g)
    }

    /// Fails on any user-supplied key the scenario never read.
    pub fn finish(&self, scenario: &str) -> Result<(), CliError> {
        if let Some(Value::String(s)) = self.table.get("scenario") {
            if s != scenario {
                return Err(CliError::Config(format!(
                    "`scenario`: config is for `{s}`, but `{scenario}` was requested"
                )));
            }
        }
        let used = self.used.borrow();
        let unused: Vec<&str> = self
            .user_keys
            .iter()
            .filter(|k| k.as_str() != "scenario" && !used.contains(k.as_str()))
            .map(String::as_str)
            .collect();
        if unused.is_empty() {
            Ok(())
        } else {
            Err(CliError::Config(format!(
                "keys not used by `{scenario}` with this model and kernel: {}",
                unused.join(", ")
            )))
        }
    }

    pub fn model(&self) -> Result<ModelSpacetime, CliError> {
        let name = self.str("model")?;
        let horizon = self.positive("horizon")?;
        let built = match name.as_str() {
            "euclidean" => ModelSpacetime::euclidean(self.usize("dim")?, horizon),
            "sphere" => {
                ModelSpacetime::sphere(self.usize("dim")?, self.positive("radius")?, horizon)
            }
            "hyperbolic3" => ModelSpacetime::hyperbolic3(horizon),
            "shrinking-sphere" => {
                ModelSpacetime::shrinking_sphere(self.usize("dim")?, self.f64("offset")?, horizon)
            }
            "gaussian-soliton" => ModelSpacetime::gaussian_soliton(self.usize("dim")?, horizon),
            other => {
                return Err(CliError::Config(format!(
                    "`model`: unknown model `{other}` (euclidean, sphere, hyperbolic3, \
                     shrinking-sphere, gaussian-soliton)"
                )))
            }
        };
        built.map_err(|e| CliError::Config(format!("`model`: {e}")))
    }

    pub fn kernel(&self, model: &ModelSpacetime) -> Result<KernelField, CliError> {
        let name = self.str("kernel")?;
        let built = match name.as_str() {
            "heat" => own_heat_kernel(model),
            "euclidean" => KernelField::euclidean(model),
            "sphere-spectral" => KernelField::new(
                model,
                KernelKind::SphereSpectral {
                    tol: self.positive("spectral_tol")?,
                },
            ),
            "hyperbolic3" => KernelField::hyperbolic3(model),
            "transplant" => KernelField::transplant(self.i32("curvature")?, model),
            "reduced-volume" => KernelField::reduced_volume_density(model),
            other => {
                return Err(CliError::Config(format!(
                    "`kernel`: unknown kernel `{other}` (heat, euclidean, sphere-spectral, \
                     hyperbolic3, transplant, reduced-volume)"
                )))
            }
        };
        built.map_err(|e| CliError::Config(format!("`kernel`: {e}")))
    }

    pub fn test_function(&self, n: usize) -> Result<TestFunction, CliError> {
        let name = self.str("phi")?;
        Ok(match name.as_str() {
            "one" => TestFunction::one(),
            "constant" => TestFunction::Constant {
                c: self.f64("phi_c")?,
            },
            "x1" => TestFunction::first_coordinate(n),
            "linear" => {
                let a = self.f64_list("phi_coeffs")?;
                if a.len() != n {
                    return Err(CliError::Config(format!(
                        "`phi_coeffs`: expected {n} coefficients, got {}",
                        a.len()
                    )));
                }
                TestFunction::CoordinateLinear {
                    a,
                    b: self.f64("phi_b")?,
                }
            }
            "radial-caloric" => TestFunction::RadialCaloric,
            "radial-polynomial" => TestFunction::RadialPolynomial {
                a: self.f64("phi_a")?,
                b: self.f64("phi_b")?,
                c: self.f64("phi_c")?,
            },
            other => {
                return Err(CliError::Config(format!(
                    "`phi`: unknown test function `{other}` (one, constant, x1, linear, \
                     radial-caloric, radial-polynomial)"
                )))
            }
        })
    }

    /// Origin `(y, s)`; `y` defaults to the pole.
    pub fn origin(&self, n: usize) -> Result<SpaceTimeOrigin, CliError> {
        let y = if self.has("origin") {
            self.f64_list("origin")?
        } else {
            vec![0.0; n]
        };
        if y.len() != n {
            return Err(CliError::Config(format!(
                "`origin`: expected {n} coordinates, got {}",
                y.len()
            )));
        }
        Ok(SpaceTimeOrigin::new(y, self.f64("origin_time")?))
    }

    /// Model, kernel, test function and origin, checked for admissibility.
    pub fn setup(&self) -> Result<Setup, CliError> {
        let model = self.model()?;
        let kernel = self.kernel(&model)?;
        let phi = self.test_function(model.dim())?;
        let origin = self.origin(model.dim())?;
        phi.validate(&model, &origin)
            .map_err(|e| CliError::Config(format!("`phi`: {e}")))?;
        Ok(Setup {
            model,
            kernel,
            phi,
            origin,
        })
    }
}

pub struct Setup {
    pub model: ModelSpacetime,
    pub kernel: KernelField,
    pub phi: TestFunction,
    pub origin: SpaceTimeOrigin,
}

#[cfg(test)]
mod tests {
    use super::*;

    const DEFAULTS: &str = "model = \"euclidean\"\ndim = 2\nhorizon = 10.0\n";

    #[test]
    fn overrides_accept_bare_words() {
        let p = Params::load(DEFAULTS, None, &["model=sphere".into(), "radius=2".into()]).unwrap();
        assert_eq!(p.str("model").unwrap(), "sphere");
        assert_eq!(p.f64("radius").unwrap(), 2.0);
    }

    #[test]
    fn unused_user_keys_are_reported() {
        let p = Params::load(DEFAULTS, None, &["radius=2".into()]).unwrap();
        p.model().unwrap();
        let err = p.finish("mvp").unwrap_err().to_string();
        assert!(err.contains("radius"), "{err}");
    }

    #[test]
    fn nested_tables_are_rejected() {
        assert!(Params::load("[model]\nname = 1\n", None, &[]).is_err());
        assert!(Params::load(DEFAULTS, None, &["grid=[[1]]".into()]).is_err());
    }

    #[test]
    fn grids_must_increase() {
        let p = Params::load("r = [1.0, 0.5]\n", None, &[]).unwrap();
        assert!(p.grid("r").is_err());
    }
}
