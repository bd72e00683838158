//! Log-domain helpers shared by the exact oracles and the estimators.

/// `ln Σ exp(x_i)`, ignoring `-inf` terms. Returns `-inf` for an empty or all-`-inf` input.
pub fn log_sum_exp<I>(values: I) -> f64
where
    I: IntoIterator<Item = f64>,
    I::IntoIter: Clone,
{
    let iter = values.into_iter();
    let max = iter.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let sum: f64 = iter.map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

/// Log of the Boltzmann factor `e^{-β·E}`.
///
/// Zero-energy states keep weight one at `β = ∞`; every other state gets `-inf`.
#[inline]
pub fn log_boltzmann(beta: f64, energy: u32) -> f64 {
    if energy == 0 {
        0.0
    } else {
        -beta * f64::from(energy)
    }
}

/// `d · E` with the convention `∞ · 0 = 0`.
#[inline]
pub fn scaled_energy(d: f64, energy: u32) -> f64 {
    if energy == 0 {
        0.0
    } else {
        d * f64::from(energy)
    }
}

/// Midpoint of two inverse temperatures; infinite if either end is.
#[inline]
pub fn midpoint(a: f64, b: f64) -> f64 {
    if a.is_infinite() || b.is_infinite() {
        f64::INFINITY
    } else {
        0.5 * (a + b)
    }
}

/// Median of a slice; sorts a copy. Panics on an empty slice.
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "median of empty slice");
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid]
    } else {
        0.5 * (v[mid - 1] + v[mid])
    }
}

/// Serde adapter writing infinite inverse temperatures as the string `"inf"`.
pub mod serde_beta {
    use serde::de::{self, Deserializer, Visitor};
    use serde::Serializer;
    use std::fmt;

    pub fn serialize<S: Serializer>(value: &f64, serializer: S) -> Result<S::Ok, S::Error> {
        if value.is_infinite() && *value > 0.0 {
            serializer.serialize_str("inf")
        } else {
            serializer.serialize_f64(*value)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> Result<f64, D::Error> {
        deserializer.deserialize_any(BetaVisitor)
    }

    struct BetaVisitor;

    impl Visitor<'_> for BetaVisitor {
        type Value = f64;

        fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
            f.write_str("a nonnegative number or \"inf\"")
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
                "inf" | "infinity" | "Infinity" | "+inf" => Ok(f64::INFINITY),
                other => other.parse().map_err(E::custom),
            }
        }
    }

    /// Same adapter for sequences.
    pub mod vec {
        use serde::ser::SerializeSeq;
        use serde::{Deserialize, Deserializer, Serializer};

        #[derive(serde::Serialize, Deserialize)]
        #[serde(transparent)]
        struct Beta(#[serde(with = "super")] f64);

        pub fn serialize<S: Serializer>(values: &[f64], serializer: S) -> Result<S::Ok, S::Error> {
            let mut seq = serializer.serialize_seq(Some(values.len()))?;
            for v in values {
                seq.serialize_element(&Beta(*v))?;
            }
            seq.end()
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> Result<Vec<f64>, D::Error> {
            let raw: Vec<Beta> = Vec::deserialize(deserializer)?;
            Ok(raw.into_iter().map(|b| b.0).collect())
        }
    }
}
