//! JSON-lines diagram serialisation.
//!
//! One record per point: `{"dim":0,"birth":0.0,"death":1.5,"mult":1}`, with
//! `"death":"inf"` for essential points. Dataset-level metadata lives in a
//! separate [`DiagramHeader`].

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{DiagramPoint, PersistenceDiagram, PersistenceError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum Death {
    Finite(f64),
    Tag(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointRecord {
    pub dim: usize,
    pub birth: f64,
    death: Death,
    pub mult: usize,
}

impl From<&DiagramPoint> for PointRecord {
    fn from(p: &DiagramPoint) -> Self {
        Self {
            dim: p.dim,
            birth: p.birth,
            death: if p.is_essential() {
                Death::Tag("inf".into())
            } else {
                Death::Finite(p.death)
            },
            mult: p.multiplicity,
        }
    }
}

impl PointRecord {
    pub fn to_point(&self) -> Result<DiagramPoint, String> {
        let death = match &self.death {
            Death::Finite(v) => *v,
            Death::Tag(t) if t == "inf" => f64::INFINITY,
            Death::Tag(t) => return Err(format!("unknown death tag {t:?}")),
        };
        if !self.birth.is_finite() {
            return Err("birth must be finite".into());
        }
        if death <= self.birth {
            return Err(format!("death {death} not above birth {}", self.birth));
        }
        Ok(DiagramPoint {
            dim: self.dim,
            birth: self.birth,
            death,
            multiplicity: self.mult,
        })
    }
}

/// Dataset-level header stored next to per-sample diagram files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagramHeader {
    pub format: String,
    /// Largest finite filtration value over every complex of the dataset.
    pub max_filtration_value: f64,
}

impl DiagramHeader {
    pub const FORMAT: &'static str = "diagram-jsonl/1";

    pub fn new(max_filtration_value: f64) -> Self {
        Self {
            format: Self::FORMAT.into(),
            max_filtration_value,
        }
    }
}

pub fn write_jsonl<W: Write>(mut w: W, d: &PersistenceDiagram) -> Result<(), PersistenceError> {
    for p in d.points() {
        let line = serde_json::to_string(&PointRecord::from(p))
            .map_err(|e| PersistenceError::Io(e.to_string()))?;
        writeln!(w, "{line}").map_err(|e| PersistenceError::Io(e.to_string()))?;
    }
    Ok(())
}

pub fn read_jsonl<R: BufRead>(r: R) -> Result<PersistenceDiagram, PersistenceError> {
    let mut points = Vec::new();
    for (k, line) in r.lines().enumerate() {
        let line = line.map_err(|e| PersistenceError::Io(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: PointRecord =
            serde_json::from_str(&line).map_err(|e| PersistenceError::Record {
                line: k + 1,
                reason: e.to_string(),
            })?;
        let p = rec.to_point().map_err(|reason| PersistenceError::Record {
            line: k + 1,
            reason,
        })?;
        points.push(p);
    }
    Ok(PersistenceDiagram::new(points))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn essential_death_is_tagged() {
        let d = PersistenceDiagram::new(vec![DiagramPoint::essential(0, 0.5)]);
        let mut buf = Vec::new();
        write_jsonl(&mut buf, &d).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text.trim(),
            r#"{"dim":0,"birth":0.5,"death":"inf","mult":1}"#
        );
    }

    #[test]
    fn malformed_lines_report_line_number() {
        let text = "{\"dim\":0,\"birth\":0.0,\"death\":1.0,\"mult\":1}\nnot json\n";
        let err = read_jsonl(text.as_bytes()).unwrap_err();
        assert!(matches!(err, PersistenceError::Record { line: 2, .. }));
        let text = "{\"dim\":0,\"birth\":2.0,\"death\":1.0,\"mult\":1}\n";
        assert!(read_jsonl(text.as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn jsonl_round_trip(pts in proptest::collection::vec(
            (0usize..2, -10.0f64..10.0, 0.001f64..10.0, 1usize..4, any::<bool>()), 0..20)
        ) {
            let d = PersistenceDiagram::new(pts.into_iter().map(|(dim, b, p, m, ess)| {
                let death = if ess { f64::INFINITY } else { b + p };
                DiagramPoint { dim, birth: b, death, multiplicity: m }
            }).collect());
            let mut buf = Vec::new();
            write_jsonl(&mut buf, &d).unwrap();
            prop_assert_eq!(read_jsonl(buf.as_slice()).unwrap(), d);
        }
    }
}
