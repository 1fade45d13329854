//! Serde adapters storing dense vectors as plain arrays and matrices as
//! row-major arrays of rows.

use nalgebra::{DMatrix, DVector};
use serde::{de::Error, Deserialize, Deserializer, Serialize, Serializer};

pub mod vector {
    use super::*;

    pub fn serialize<S: Serializer>(v: &DVector<f64>, s: S) -> Result<S::Ok, S::Error> {
        v.as_slice().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DVector<f64>, D::Error> {
        let v = Vec::<f64>::deserialize(d)?;
        Ok(DVector::from_vec(v))
    }
}

pub mod opt_vector {
    use super::*;

    pub fn serialize<S: Serializer>(v: &Option<DVector<f64>>, s: S) -> Result<S::Ok, S::Error> {
        v.as_ref().map(|v| v.as_slice().to_vec()).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<DVector<f64>>, D::Error> {
        let v = Option::<Vec<f64>>::deserialize(d)?;
        Ok(v.map(DVector::from_vec))
    }
}

pub mod matrix {
    use super::*;

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = m
            .row_iter()
            .map(|r| r.iter().copied().collect())
            .collect();
        rows.serialize(s)
    }

    /// A matrix with no rows comes back as `0 × 0`; callers that know the
    /// column count reshape it.
    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        let ncols = rows.first().map_or(0, Vec::len);
        from_rows(ncols, &rows).map_err(D::Error::custom)
    }
}

pub fn from_rows(ncols: usize, rows: &[Vec<f64>]) -> Result<DMatrix<f64>, String> {
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != ncols) {
        return Err(format!("row {i} has {} entries, expected {ncols}", r.len()));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

/// JSON has no infinities or NaN; these are written as the strings `"inf"`,
/// `"-inf"` and `"nan"` and read back from either form (`null` reads as NaN).
#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum Float {
    Num(f64),
    Text(String),
    Null(()),
}

fn encode(v: f64) -> Float {
    if v.is_finite() {
        Float::Num(v)
    } else if v.is_nan() {
        Float::Text("nan".into())
    } else if v > 0.0 {
        Float::Text("inf".into())
    } else {
        Float::Text("-inf".into())
    }
}

fn decode(f: Float) -> Result<f64, String> {
    match f {
        Float::Num(v) => Ok(v),
        Float::Null(()) => Ok(f64::NAN),
        Float::Text(t) => match t.as_str() {
            "inf" | "Infinity" => Ok(f64::INFINITY),
            "-inf" | "-Infinity" => Ok(f64::NEG_INFINITY),
            "nan" | "NaN" => Ok(f64::NAN),
            other => Err(format!("not a number: {other:?}")),
        },
    }
}

pub mod float {
    use super::*;

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        encode(*v).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        decode(Float::deserialize(d)?).map_err(D::Error::custom)
    }
}

pub mod floats {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(|x| encode(*x)).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        Vec::<Float>::deserialize(d)?
            .into_iter()
            .map(|f| decode(f).map_err(D::Error::custom))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize, Deserialize)]
    struct Wrap {
        #[serde(with = "float")]
        a: f64,
        #[serde(with = "floats")]
        b: Vec<f64>,
    }

    #[test]
    fn non_finite_floats_round_trip() {
        let w = Wrap { a: f64::INFINITY, b: vec![1.5, f64::NEG_INFINITY, f64::NAN] };
        let text = serde_json::to_string(&w).unwrap();
        assert_eq!(text, r#"{"a":"inf","b":[1.5,"-inf","nan"]}"#);
        let back: Wrap = serde_json::from_str(&text).unwrap();
        assert_eq!(back.a, f64::INFINITY);
        assert_eq!(back.b[0], 1.5);
        assert_eq!(back.b[1], f64::NEG_INFINITY);
        assert!(back.b[2].is_nan());
        let null: Wrap = serde_json::from_str(r#"{"a":null,"b":[null]}"#).unwrap();
        assert!(null.a.is_nan() && null.b[0].is_nan());
    }
}
