// Complex vectors as `[re, im]` pairs in serde documents.

use faer::c64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

fn pairs(v: &[c64]) -> Vec<[f64; 2]> {
    v.iter().map(|z| [z.re, z.im]).collect()
}

fn unpairs(v: Vec<[f64; 2]>) -> Vec<c64> {
    v.into_iter().map(|[re, im]| c64::new(re, im)).collect()
}

pub(crate) mod vec {
    use super::*;

    pub(crate) fn serialize<S: Serializer>(v: &[c64], s: S) -> Result<S::Ok, S::Error> {
        pairs(v).serialize(s)
    }

    pub(crate) fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<c64>, D::Error> {
        Ok(unpairs(Vec::deserialize(d)?))
    }
}

pub(crate) mod vec_vec {
    use super::*;

    pub(crate) fn serialize<S: Serializer>(v: &[Vec<c64>], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(|x| pairs(x)).collect::<Vec<_>>().serialize(s)
    }

    pub(crate) fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<c64>>, D::Error> {
        Ok(Vec::<Vec<[f64; 2]>>::deserialize(d)?.into_iter().map(unpairs).collect())
    }
}
