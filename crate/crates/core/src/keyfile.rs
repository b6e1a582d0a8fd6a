//! TOML key files and key generation.
//!
//! ```toml
//! k = 5
//! x0 = 0.7310585786300049
//! r = 3.99
//! burn_in = 1000
//! mac_key = "<64 hex characters>"
//! ```

use rand::rngs::OsRng;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::chaos::{ChaosError, LogisticParams, DEFAULT_BURN_IN};
use crate::scheme::{SchemeKey, MAC_KEY_LEN};

pub const DEFAULT_K: u64 = 5;
pub const DEFAULT_R: f64 = 3.99;

#[derive(Debug, Error)]
pub enum KeyFileError {
    #[error("cannot parse key file: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("mac_key must be {} hex characters", 2 * MAC_KEY_LEN)]
    MacKey,
    #[error("k must be at least 1")]
    ZeroK,
    #[error(transparent)]
    Logistic(#[from] ChaosError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KeyFile {
    pub k: u64,
    pub x0: f64,
    pub r: f64,
    pub burn_in: u64,
    pub mac_key: String,
}

impl KeyFile {
    pub fn parse(text: &str) -> Result<Self, KeyFileError> {
        let file: KeyFile = toml::from_str(text)?;
        file.to_key()?;
        Ok(file)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("key file fields always serialize")
    }

    pub fn to_key(&self) -> Result<SchemeKey, KeyFileError> {
        if self.k == 0 {
            return Err(KeyFileError::ZeroK);
        }
        let mut mac_key = [0u8; MAC_KEY_LEN];
        if self.mac_key.len() != 2 * MAC_KEY_LEN {
            return Err(KeyFileError::MacKey);
        }
        hex::decode_to_slice(&self.mac_key, &mut mac_key).map_err(|_| KeyFileError::MacKey)?;
        let logistic = LogisticParams::new(self.x0, self.r, self.burn_in)?;
        Ok(SchemeKey::new(self.k, logistic, mac_key))
    }

    pub fn from_key(key: &SchemeKey) -> Self {
        Self {
            k: key.k,
            x0: key.logistic.x0(),
            r: key.logistic.r(),
            burn_in: key.logistic.burn_in(),
            mac_key: hex::encode(key.mac_key),
        }
    }
}

/// Fresh key with the default `k`, `r` and burn-in. A seed makes the output
/// deterministic; otherwise `x0` and the MAC key come from the OS generator.
pub fn keygen(seed: Option<&[u8]>) -> KeyFile {
    match seed {
        Some(seed) => {
            let digest: [u8; 32] = Sha256::digest(seed).into();
            generate(&mut ChaCha20Rng::from_seed(digest))
        }
        None => generate(&mut OsRng),
    }
}

fn generate<R: RngCore>(rng: &mut R) -> KeyFile {
    let mut mac_key = [0u8; MAC_KEY_LEN];
    rng.fill_bytes(&mut mac_key);
    let x0 = loop {
        let x: f64 = rng.gen();
        if LogisticParams::new(x, DEFAULT_R, DEFAULT_BURN_IN).is_ok() {
            break x;
        }
    };
    KeyFile {
        k: DEFAULT_K,
        x0,
        r: DEFAULT_R,
        burn_in: DEFAULT_BURN_IN,
        mac_key: hex::encode(mac_key),
    }
}
