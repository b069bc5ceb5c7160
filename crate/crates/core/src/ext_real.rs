//! Serde adapter for extended-real fields.
//!
//! JSON has no literal for infinities, and `serde_json` would otherwise
//! flatten them to `null`. Fields tagged `#[serde(with = "crate::ext_real")]`
//! keep finite values as ordinary numbers and spell the rest out:
//!
//! ```text
//!     +inf -> "inf"      -inf -> "-inf"      NaN -> "nan"
//! ```
//!
//! Deserialization accepts both plain numbers and those strings, so every
//! report round-trips.

use serde::de::{self, Deserializer, Unexpected, Visitor};
use serde::Serializer;

pub fn serialize<S: Serializer>(value: &f64, serializer: S) -> Result<S::Ok, S::Error> {
    if value.is_finite() {
        serializer.serialize_f64(*value)
    } else if value.is_nan() {
        serializer.serialize_str("nan")
    } else if *value > 0.0 {
        serializer.serialize_str("inf")
    } else {
        serializer.serialize_str("-inf")
    }
}

pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> Result<f64, D::Error> {
    struct ExtReal;

    impl Visitor<'_> for ExtReal {
        type Value = f64;

        fn expecting(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
            f.write_str("a number or one of \"inf\", \"-inf\", \"nan\"")
        }

        fn visit_f64<E: de::Error>(self, v: f64) -> Result<f64, E> {
            Ok(v)
        }

        fn visit_i64<E: de::Error>(self, v: i64) -> Result<f64, E> {
            Ok(v as f64)
        }

        fn visit_u64<E: de::Error>(self, v: u64) -> Result<f64, E> {
            Ok(v as f64)
        }

        fn visit_str<E: de::Error>(self, v: &str) -> Result<f64, E> {
            match v {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                _ => Err(E::invalid_value(Unexpected::Str(v), &self)),
            }
        }
    }

    deserializer.deserialize_any(ExtReal)
}

#[cfg(test)]
mod tests {
    use serde::{Deserialize, Serialize};

    #[derive(Serialize, Deserialize)]
    struct Holder {
        #[serde(with = "crate::ext_real")]
        x: f64,
    }

    #[test]
    fn encodes_and_round_trips() {
        for (value, json) in [
            (1.5, "{\"x\":1.5}"),
            (f64::INFINITY, "{\"x\":\"inf\"}"),
            (f64::NEG_INFINITY, "{\"x\":\"-inf\"}"),
        ] {
            let got = serde_json::to_string(&Holder { x: value }).unwrap();
            assert_eq!(got, json);
            let back: Holder = serde_json::from_str(&got).unwrap();
            assert_eq!(back.x, value);
        }
        let nan: Holder = serde_json::from_str("{\"x\":\"nan\"}").unwrap();
        assert!(nan.x.is_nan());
        assert!(serde_json::from_str::<Holder>("{\"x\":\"huge\"}").is_err());
    }
}
