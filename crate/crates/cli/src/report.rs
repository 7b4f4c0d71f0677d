//! Report envelope and its fixed-format JSON rendering.

use std::io;

use gascert_core::Verdict;
use serde::ser::Serialize;
use serde::Deserialize;
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::config::Loaded;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Connective,
    Riccati,
    SmallGain,
    Simulate,
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, Deserialize)]
pub struct Controllability {
    pub id: String,
    pub controllable: bool,
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, Deserialize)]
pub struct Report<T> {
    pub tool: String,
    pub version: String,
    pub method: Method,
    /// Hex SHA-256 of the config document.
    pub input_sha256: String,
    pub verdict: Verdict,
    pub exit_code: i32,
    /// Rank test on the raw `(A_ii, B_i)`; informational.
    pub controllability: Vec<Controllability>,
    pub result: T,
}

impl<T: Serialize> Report<T> {
    pub fn new(loaded: &Loaded, method: Method, verdict: Verdict, exit_code: i32, result: T) -> Self {
        Report {
            tool: "gascert".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            method,
            input_sha256: loaded.digest.clone(),
            verdict,
            exit_code,
            controllability: loaded
                .subsystems
                .iter()
                .map(|s| Controllability {
                    id: s.id.clone(),
                    controllable: s.is_controllable(),
                })
                .collect(),
            result,
        }
    }

    pub fn to_json(&self) -> String {
        to_json(self)
    }
}

/// `f64` with 17 significant digits (`{:.16e}`), exact on round trip.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Pretty-printed JSON with every float rendered by [`fmt_f64`];
/// non-finite values become `null`.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, FixedFloat(PrettyFormatter::new()));
    value.serialize(&mut ser).expect("reports serialize to memory");
    buf.push(b'\n');
    String::from_utf8(buf).expect("serde_json writes UTF-8")
}

struct FixedFloat<'a>(PrettyFormatter<'a>);

impl Formatter for FixedFloat<'_> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        w.write_all(fmt_f64(value).as_bytes())
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}
