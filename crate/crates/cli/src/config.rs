//! JSON system configs. Structural errors carry the JSON path of the
//! offending field; semantic errors name the generator by index and id.

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use pseudorbit::gallery::{build_gallery, GalleryName};
use pseudorbit::pseudogroup::{GeneratingSet, LocalMap, Piece, Rule, Span};
use pseudorbit::space::{CompactSpace, SpaceKind};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub space: String,
    pub generators: Vec<GeneratorConfig>,
    #[serde(default)]
    pub metadata: Value,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorConfig {
    pub id: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub kind: String,
    #[serde(default)]
    pub pieces: Vec<PieceConfig>,
    #[serde(default)]
    pub lipschitz: Option<f64>,
    pub inverse: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PieceConfig {
    pub domain: [f64; 2],
    #[serde(default)]
    pub params: Map<String, Value>,
}

#[derive(Debug)]
pub struct ConfigError {
    pub field: String,
    pub reason: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config field `{}`: {}", self.field, self.reason)
    }
}

impl std::error::Error for ConfigError {}

fn err(field: impl Into<String>, reason: impl Into<String>) -> ConfigError {
    ConfigError {
        field: field.into(),
        reason: reason.into(),
    }
}

impl SystemConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            err(
                if path == "." { "<root>".into() } else { path },
                e.into_inner().to_string(),
            )
        })
    }

    pub fn build(&self) -> Result<Arc<GeneratingSet>, ConfigError> {
        let kind = SpaceKind::from_str(&self.space).map_err(|e| err("space", e.to_string()))?;
        let space = CompactSpace::new(kind);
        let maps = self
            .generators
            .iter()
            .enumerate()
            .map(|(i, g)| g.to_map(i))
            .collect::<Result<Vec<_>, _>>()?;
        GeneratingSet::new(space, maps).map(Arc::new).map_err(|e| {
            let field = match &e {
                pseudorbit::Error::InvalidGenerator { id, .. } => self
                    .generators
                    .iter()
                    .position(|g| g.id == *id)
                    .map_or_else(|| "generators".to_string(), |i| format!("generators[{i}]")),
                _ => "generators".to_string(),
            };
            err(field, e.to_string())
        })
    }
}

fn number(params: &Map<String, Value>, key: &str, field: &str) -> Result<f64, ConfigError> {
    match params.get(key) {
        Some(v) => v
            .as_f64()
            .ok_or_else(|| err(format!("{field}.{key}"), "expected a number")),
        None => Err(err(format!("{field}.{key}"), "missing parameter")),
    }
}

fn flag(params: &Map<String, Value>, key: &str, field: &str) -> Result<bool, ConfigError> {
    match params.get(key) {
        None => Ok(false),
        Some(v) => v
            .as_bool()
            .ok_or_else(|| err(format!("{field}.{key}"), "expected a boolean")),
    }
}

fn rule(kind: &str, params: &Map<String, Value>, field: &str) -> Result<Rule, ConfigError> {
    let allowed: &[&str] = match kind {
        "affine" => &["slope", "offset"],
        "moebius" => &["a", "b", "c", "d"],
        "sine" => &["amp", "phase", "inverted"],
        "plateau" => &["source", "radius", "slope", "inverted"],
        _ => &[],
    };
    if let Some(k) = params.keys().find(|k| !allowed.contains(&k.as_str())) {
        return Err(err(
            format!("{field}.{k}"),
            format!("unknown parameter for kind `{kind}`"),
        ));
    }
    let n = |key| number(params, key, field);
    Ok(match kind {
        "affine" => Rule::Affine {
            slope: n("slope")?,
            offset: n("offset")?,
        },
        "moebius" => Rule::Moebius {
            a: n("a")?,
            b: n("b")?,
            c: n("c")?,
            d: n("d")?,
        },
        "sine" => Rule::Sine {
            amp: n("amp")?,
            phase: n("phase")?,
            inverted: flag(params, "inverted", field)?,
        },
        "plateau" => Rule::Plateau {
            source: n("source")?,
            radius: n("radius")?,
            slope: n("slope")?,
            inverted: flag(params, "inverted", field)?,
        },
        _ => unreachable!("kind checked by caller"),
    })
}

impl GeneratorConfig {
    fn to_map(&self, index: usize) -> Result<LocalMap, ConfigError> {
        let field = format!("generators[{index}]");
        match self.kind.as_str() {
            "identity" => {
                if !self.pieces.is_empty() {
                    return Err(err(format!("{field}.pieces"), "the identity takes no pieces"));
                }
                if self.inverse != self.id {
                    return Err(err(format!("{field}.inverse"), "the identity is its own inverse"));
                }
                return Ok(LocalMap::identity(self.id));
            }
            "affine" | "moebius" | "sine" | "plateau" => {}
            other => {
                return Err(err(
                    format!("{field}.kind"),
                    format!("unknown kind `{other}` (expected identity, affine, moebius, sine or plateau)"),
                ))
            }
        }
        if self.pieces.is_empty() {
            return Err(err(format!("{field}.pieces"), "at least one piece is required"));
        }
        let lipschitz = self
            .lipschitz
            .ok_or_else(|| err(format!("{field}.lipschitz"), "missing Lipschitz bound"))?;
        let pieces = self
            .pieces
            .iter()
            .enumerate()
            .map(|(j, p)| {
                Ok(Piece {
                    domain: Span::new(p.domain[0], p.domain[1]),
                    rule: rule(&self.kind, &p.params, &format!("{field}.pieces[{j}].params"))?,
                })
            })
            .collect::<Result<Vec<_>, ConfigError>>()?;
        Ok(LocalMap {
            id: self.id,
            name: self.name.clone().unwrap_or_else(|| format!("g{}", self.id)),
            pieces,
            lipschitz,
            inverse_id: self.inverse,
        })
    }
}

/// A system named on the command line: `gallery:<name>` or a config path.
#[derive(Clone, Debug)]
pub struct System {
    /// Canonical description hashed into cache keys.
    pub key: Value,
    pub gens: Arc<GeneratingSet>,
    pub gallery: Option<GalleryName>,
}

pub fn load_system(spec: &str) -> anyhow::Result<System> {
    if spec.starts_with("gallery:") {
        let name = GalleryName::from_str(spec)?;
        let sys = build_gallery(&name)?;
        return Ok(System {
            key: Value::String(format!("gallery:{name}")),
            gens: sys.gens,
            gallery: Some(name),
        });
    }
    let text =
        std::fs::read_to_string(Path::new(spec)).map_err(|e| anyhow::anyhow!("cannot read config `{spec}`: {e}"))?;
    let config = SystemConfig::parse(&text)?;
    let gens = config.build()?;
    Ok(System {
        key: serde_json::to_value(&config)?,
        gens,
        gallery: None,
    })
}
