//! Serde adapters that write 0-based indices as 1-based, matching the
//! `Q_1 … Q_N` / `P_1 … P_M` numbering used in task files and reports.

pub mod one_based {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &usize, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(*v as u64 + 1)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<usize, D::Error> {
        let v = u64::deserialize(d)?;
        if v == 0 {
            return Err(serde::de::Error::custom("indices are 1-based"));
        }
        Ok(v as usize - 1)
    }
}

pub mod one_based_opt {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<usize>, s: S) -> Result<S::Ok, S::Error> {
        v.map(|i| i + 1).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<usize>, D::Error> {
        match Option::<u64>::deserialize(d)? {
            Some(0) => Err(serde::de::Error::custom("indices are 1-based")),
            Some(v) => Ok(Some(v as usize - 1)),
            None => Ok(None),
        }
    }
}

pub mod one_based_vec {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[usize], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(|i| i + 1).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<usize>, D::Error> {
        Vec::<u64>::deserialize(d)?
            .into_iter()
            .map(|v| {
                if v == 0 {
                    Err(serde::de::Error::custom("indices are 1-based"))
                } else {
                    Ok(v as usize - 1)
                }
            })
            .collect()
    }
}

pub mod one_based_pair {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &(usize, usize), s: S) -> Result<S::Ok, S::Error> {
        (v.0 + 1, v.1 + 1).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<(usize, usize), D::Error> {
        let (a, b) = <(u64, u64)>::deserialize(d)?;
        if a == 0 || b == 0 {
            return Err(serde::de::Error::custom("indices are 1-based"));
        }
        Ok((a as usize - 1, b as usize - 1))
    }
}

pub mod one_based_pairs {
    use serde::{Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[(usize, usize)], s: S) -> Result<S::Ok, S::Error> {
        v.iter()
            .map(|(a, b)| (a + 1, b + 1))
            .collect::<Vec<_>>()
            .serialize(s)
    }
}
