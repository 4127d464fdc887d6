//! JSON and CSV coefficient documents.

use serde::{Deserialize, Serialize};

use super::lde::{FilterCoefficients, FilterDesign, LdeCoefficients, NonCausalPair};
use super::weight::Causality;
use crate::{Error, Result};

/// Design parameters recorded alongside exported coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DesignRecord {
    #[serde(rename = "B")]
    pub degree: usize,
    #[serde(rename = "D")]
    pub derivative: usize,
    pub kappa: u32,
    pub sigma: f64,
    pub q: f64,
    pub causality: Causality,
}

impl From<&FilterDesign> for DesignRecord {
    fn from(d: &FilterDesign) -> Self {
        DesignRecord {
            degree: d.degree,
            derivative: d.derivative,
            kappa: d.weight.kappa(),
            sigma: d.weight.sigma(),
            q: d.delay,
            causality: d.weight.causality(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Section {
    b: Vec<f64>,
    a: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum Body {
    Causal { b: Vec<f64>, a: Vec<f64> },
    NonCausal { forward: Section, backward: Section },
}

/// Serialized coefficients: `{b, a, T, design}` for causal filters and
/// `{forward: {b, a}, backward: {b, a}, T, design}` for non-causal pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientDocument {
    #[serde(flatten)]
    body: Body,
    #[serde(rename = "T")]
    pub sample_period: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub design: Option<DesignRecord>,
}

impl CoefficientDocument {
    pub fn new(coefficients: &FilterCoefficients, design: Option<DesignRecord>) -> Self {
        let body = match coefficients {
            FilterCoefficients::Causal(lde) => Body::Causal {
                b: lde.b().to_vec(),
                a: lde.a().to_vec(),
            },
            FilterCoefficients::NonCausal(pair) => Body::NonCausal {
                forward: Section {
                    b: pair.forward.b().to_vec(),
                    a: pair.forward.a().to_vec(),
                },
                backward: Section {
                    b: pair.backward.b().to_vec(),
                    a: pair.backward.a().to_vec(),
                },
            },
        };
        CoefficientDocument {
            body,
            sample_period: coefficients.sample_period(),
            design,
        }
    }

    pub fn coefficients(&self) -> Result<FilterCoefficients> {
        let t = self.sample_period;
        Ok(match &self.body {
            Body::Causal { b, a } => LdeCoefficients::new(b.clone(), a.clone(), t)?.into(),
            Body::NonCausal { forward, backward } => NonCausalPair {
                forward: LdeCoefficients::new(forward.b.clone(), forward.a.clone(), t)?,
                backward: LdeCoefficients::new(backward.b.clone(), backward.a.clone(), t)?,
            }
            .into(),
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Rows `b` then `a` (forward then backward for pairs), zero padded to a
    /// common length.
    pub fn to_csv(&self) -> String {
        let rows: Vec<&[f64]> = match &self.body {
            Body::Causal { b, a } => vec![b, a],
            Body::NonCausal { forward, backward } => {
                vec![&forward.b, &forward.a, &backward.b, &backward.a]
            }
        };
        let width = rows.iter().map(|r| r.len()).max().unwrap_or(0);
        let mut out = String::new();
        for row in rows {
            let cells: Vec<String> = (0..width)
                .map(|i| format!("{:?}", row.get(i).copied().unwrap_or(0.0)))
                .collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    /// Parses the CSV layout written by [`to_csv`](Self::to_csv). Trailing
    /// zero padding is kept; it does not change the transfer function.
    pub fn from_csv(text: &str, sample_period: f64) -> Result<Self> {
        let rows = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(|l| {
                l.split(',')
                    .map(|v| {
                        v.trim()
                            .parse::<f64>()
                            .map_err(|e| Error::Format(format!("bad coefficient {v:?}: {e}")))
                    })
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let body = match rows.len() {
            2 => Body::Causal {
                b: rows[0].clone(),
                a: rows[1].clone(),
            },
            4 => Body::NonCausal {
                forward: Section {
                    b: rows[0].clone(),
                    a: rows[1].clone(),
                },
                backward: Section {
                    b: rows[2].clone(),
                    a: rows[3].clone(),
                },
            },
            n => {
                return Err(Error::Format(format!(
                    "expected 2 or 4 coefficient rows, found {n}"
                )))
            }
        };
        let doc = CoefficientDocument {
            body,
            sample_period,
            design: None,
        };
        doc.coefficients()?;
        Ok(doc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::{derive_causal_lde, derive_noncausal_pair};

    #[test]
    fn json_layout() {
        let design = FilterDesign::causal(2, 0, 0, 0.5, 0.0).unwrap();
        let lde = derive_causal_lde(&design).unwrap();
        let doc = CoefficientDocument::new(&lde.clone().into(), Some((&design).into()));
        let value: serde_json::Value = serde_json::from_str(&doc.to_json().unwrap()).unwrap();
        assert_eq!(value["a"], serde_json::json!([1.0, -1.5, 0.75, -0.125]));
        assert_eq!(value["T"], serde_json::json!(1.0));
        assert_eq!(value["design"]["B"], serde_json::json!(2));
        assert_eq!(value["design"]["causality"], serde_json::json!("causal"));

        let back = CoefficientDocument::from_json(&doc.to_json().unwrap()).unwrap();
        assert_eq!(
            back.coefficients().unwrap(),
            FilterCoefficients::Causal(lde)
        );
    }

    #[test]
    fn pair_round_trips_through_json_and_csv() {
        let pair = derive_noncausal_pair(&FilterDesign::two_sided(2, 1, 0.4).unwrap()).unwrap();
        let doc = CoefficientDocument::new(&pair.clone().into(), None);
        let back = CoefficientDocument::from_json(&doc.to_json().unwrap()).unwrap();
        assert_eq!(
            back.coefficients().unwrap(),
            FilterCoefficients::NonCausal(pair.clone())
        );

        let csv = CoefficientDocument::from_csv(&doc.to_csv(), 1.0).unwrap();
        assert_eq!(
            csv.coefficients().unwrap(),
            FilterCoefficients::NonCausal(pair)
        );
    }

    #[test]
    fn csv_pads_rows() {
        let lde = LdeCoefficients::new(vec![0.5], vec![1.0, -0.5], 1.0).unwrap();
        let doc = CoefficientDocument::new(&lde.into(), None);
        assert_eq!(doc.to_csv(), "0.5,0.0\n1.0,-0.5\n");
    }

    #[test]
    fn csv_rejects_bad_rows() {
        assert!(CoefficientDocument::from_csv("1,2\n", 1.0).is_err());
        assert!(CoefficientDocument::from_csv("1,x\n1,0\n", 1.0).is_err());
    }
}
