use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::record::BeneficiaryId;

pub const AGE_RANGE: (u32, u32) = (12, 60);
pub const GESTATION_RANGE: (u32, u32) = (0, 60);
pub const EDUCATION_LEVELS: (u32, u32) = (1, 7);
pub const INCOME_GROUPS: (u32, u32) = (1, 6);
pub const CALL_SLOTS: (u32, u32) = (1, 6);

macro_rules! categorical {
    ($name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(rename_all = "lowercase")]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }

            pub fn index(self) -> usize {
                Self::ALL.iter().position(|v| *v == self).unwrap()
            }
        }

        impl FromStr for $name {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s.trim().to_ascii_lowercase().as_str() {
                    $($text => Ok($name::$variant),)+
                    other => Err(format!("unknown {} {:?}", stringify!($name), other)),
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }
    };
}

categorical!(PhoneOwner {
    Woman => "woman",
    Husband => "husband",
    Family => "family",
});

categorical!(Language {
    Hindi => "hindi",
    Marathi => "marathi",
    Gujarati => "gujarati",
    Kannada => "kannada",
    English => "english",
});

/// Registration-time demographics of one beneficiary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeneficiaryProfile {
    pub beneficiary_id: BeneficiaryId,
    pub age: u32,
    pub education_level: u32,
    pub income_group: u32,
    pub phone_owner: PhoneOwner,
    pub registration_date: NaiveDate,
    pub gestation_age: u32,
    pub language: Language,
    pub call_slot: u32,
}

/// Length of [`BeneficiaryProfile::encode`].
pub const STATIC_DIM: usize = 4 + 3 + 5 + (CALL_SLOTS.1 - CALL_SLOTS.0 + 1) as usize;

impl BeneficiaryProfile {
    /// Checks every ordinal field against its declared domain.
    pub fn validate(&self) -> Result<(), String> {
        check("age", self.age, AGE_RANGE)?;
        check("gestation_age", self.gestation_age, GESTATION_RANGE)?;
        check("education_level", self.education_level, EDUCATION_LEVELS)?;
        check("income_group", self.income_group, INCOME_GROUPS)?;
        check("call_slot", self.call_slot, CALL_SLOTS)?;
        if self.beneficiary_id.as_str().trim().is_empty() {
            return Err("beneficiary_id is empty".into());
        }
        Ok(())
    }

    /// Ordinals as integers, categoricals one-hot:
    /// `[age, gestation_age, education_level, income_group, phone_owner(3), language(5), call_slot(6)]`.
    pub fn encode(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(STATIC_DIM);
        out.push(f64::from(self.age));
        out.push(f64::from(self.gestation_age));
        out.push(f64::from(self.education_level));
        out.push(f64::from(self.income_group));
        out.extend(one_hot(self.phone_owner.index(), PhoneOwner::ALL.len()));
        out.extend(one_hot(self.language.index(), Language::ALL.len()));
        let slots = (CALL_SLOTS.1 - CALL_SLOTS.0 + 1) as usize;
        out.extend(one_hot((self.call_slot - CALL_SLOTS.0) as usize, slots));
        out
    }
}

fn check(field: &str, value: u32, (lo, hi): (u32, u32)) -> Result<(), String> {
    if value < lo || value > hi {
        Err(format!("{field} = {value} outside [{lo}, {hi}]"))
    } else {
        Ok(())
    }
}

fn one_hot(index: usize, len: usize) -> impl Iterator<Item = f64> {
    (0..len).map(move |i| if i == index { 1.0 } else { 0.0 })
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn profile() -> BeneficiaryProfile {
        BeneficiaryProfile {
            beneficiary_id: "b1".into(),
            age: 24,
            education_level: 3,
            income_group: 2,
            phone_owner: PhoneOwner::Husband,
            registration_date: NaiveDate::from_ymd_opt(2020, 5, 1).unwrap(),
            gestation_age: 14,
            language: Language::Marathi,
            call_slot: 4,
        }
    }

    #[test]
    fn encoding_layout() {
        let enc = profile().encode();
        assert_eq!(enc.len(), STATIC_DIM);
        assert_eq!(&enc[..4], &[24.0, 14.0, 3.0, 2.0]);
        assert_eq!(&enc[4..7], &[0.0, 1.0, 0.0]);
        assert_eq!(&enc[7..12], &[0.0, 1.0, 0.0, 0.0, 0.0]);
        assert_eq!(&enc[12..], &[0.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn out_of_domain_rejected() {
        let mut p = profile();
        p.education_level = 9;
        assert!(p.validate().unwrap_err().contains("education_level"));
        let mut p = profile();
        p.call_slot = 0;
        assert!(p.validate().is_err());
        assert!(profile().validate().is_ok());
    }

    #[test]
    fn categorical_parsing() {
        assert_eq!("Woman".parse::<PhoneOwner>().unwrap(), PhoneOwner::Woman);
        assert!("neighbour".parse::<PhoneOwner>().is_err());
        assert_eq!(" hindi ".parse::<Language>().unwrap(), Language::Hindi);
    }
}
