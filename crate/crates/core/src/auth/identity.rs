use std::fmt;

use ed25519_dalek::{Signature, Signer, SigningKey, Verifier, VerifyingKey};
use rand::RngCore;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::b64;

pub const ED25519: &str = "ed25519";

/// A signing identity. Key material is fixed at creation.
#[derive(Clone)]
pub struct Identity {
    subject: String,
    key: SigningKey,
}

impl fmt::Debug for Identity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Identity").field("subject", &self.subject).field("key", &self.verification_key()).finish()
    }
}

/// Fresh keypair for `subject`. With a seed the key is derived from
/// `(seed, subject)`, so the same seed gives the same key per subject and
/// distinct keys across subjects.
pub fn generate_identity(subject: &str, seed: Option<&[u8]>) -> Identity {
    let secret: [u8; 32] = match seed {
        Some(seed) => {
            let mut h = Sha256::new();
            h.update(b"geofeed-identity/1\0");
            h.update((seed.len() as u64).to_be_bytes());
            h.update(seed);
            h.update(subject.as_bytes());
            h.finalize().into()
        }
        None => {
            let mut bytes = [0u8; 32];
            rand::rngs::OsRng.fill_bytes(&mut bytes);
            bytes
        }
    };
    Identity::from_secret(subject, secret)
}

impl Identity {
    pub fn from_secret(subject: &str, secret: [u8; 32]) -> Identity {
        Identity { subject: subject.to_string(), key: SigningKey::from_bytes(&secret) }
    }

    pub fn subject(&self) -> &str {
        &self.subject
    }

    pub fn verification_key(&self) -> VerificationKey {
        VerificationKey { alg: ED25519.to_string(), bytes: self.key.verifying_key().to_bytes().to_vec() }
    }

    pub fn sign(&self, message: &[u8]) -> Vec<u8> {
        self.key.sign(message).to_bytes().to_vec()
    }

    pub fn to_file(&self) -> IdentityFile {
        IdentityFile {
            version: 1,
            subject: self.subject.clone(),
            alg: ED25519.to_string(),
            secret_key: self.key.to_bytes().to_vec(),
            public_key: self.key.verifying_key().to_bytes().to_vec(),
        }
    }
}

/// On-disk identity (private) file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdentityFile {
    pub version: u32,
    pub subject: String,
    pub alg: String,
    #[serde(with = "b64")]
    pub secret_key: Vec<u8>,
    #[serde(with = "b64")]
    pub public_key: Vec<u8>,
}

impl IdentityFile {
    pub fn into_identity(self) -> Result<Identity, String> {
        if self.alg != ED25519 {
            return Err(format!("unsupported key algorithm {:?}", self.alg));
        }
        let secret: [u8; 32] = self.secret_key.as_slice().try_into().map_err(|_| "secret key must be 32 bytes".to_string())?;
        let id = Identity::from_secret(&self.subject, secret);
        if id.verification_key().bytes != self.public_key {
            return Err("public key does not match secret key".into());
        }
        Ok(id)
    }
}

/// On-disk public key, safe to hand to an issuer. An [`IdentityFile`] also
/// parses as one, since only the public fields are read.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PublicKeyFile {
    pub version: u32,
    pub subject: String,
    pub alg: String,
    #[serde(with = "b64")]
    pub public_key: Vec<u8>,
}

impl PublicKeyFile {
    pub fn key(&self) -> VerificationKey {
        VerificationKey { alg: self.alg.clone(), bytes: self.public_key.clone() }
    }
}

impl Identity {
    pub fn public_file(&self) -> PublicKeyFile {
        PublicKeyFile {
            version: 1,
            subject: self.subject.clone(),
            alg: ED25519.to_string(),
            public_key: self.key.verifying_key().to_bytes().to_vec(),
        }
    }
}

/// Public verification key tagged with its algorithm.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct VerificationKey {
    pub alg: String,
    pub bytes: Vec<u8>,
}

impl VerificationKey {
    /// False for unknown algorithms and malformed keys or signatures.
    pub fn verify(&self, message: &[u8], signature: &[u8]) -> bool {
        if self.alg != ED25519 {
            return false;
        }
        let Ok(key_bytes) = <[u8; 32]>::try_from(self.bytes.as_slice()) else {
            return false;
        };
        let Ok(key) = VerifyingKey::from_bytes(&key_bytes) else {
            return false;
        };
        let Ok(sig) = Signature::from_slice(signature) else {
            return false;
        };
        key.verify(message, &sig).is_ok()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn sign_and_verify() {
        let id = generate_identity("LS Networks", None);
        let key = id.verification_key();
        for msg in [&b""[..], b"geofeed", &[0u8; 1000]] {
            let sig = id.sign(msg);
            assert!(key.verify(msg, &sig));
            assert!(!key.verify(b"other", &sig));
        }
    }

    #[test]
    fn seeded_is_deterministic() {
        let a = generate_identity("AT&T", Some(b"seed"));
        let b = generate_identity("AT&T", Some(b"seed"));
        assert_eq!(a.verification_key(), b.verification_key());
        assert_ne!(a.verification_key(), generate_identity("AT&T", Some(b"seed2")).verification_key());
    }

    #[test]
    fn distinct_subjects_distinct_keys() {
        let keys: HashSet<_> = (0..1800).map(|i| generate_identity(&format!("AS{i}"), Some(b"sim")).verification_key()).collect();
        assert_eq!(keys.len(), 1800);
    }

    #[test]
    fn identity_file_round_trip() {
        let id = generate_identity("X", Some(b"s"));
        let file = id.to_file();
        let json = serde_json::to_string(&file).unwrap();
        let back: IdentityFile = serde_json::from_str(&json).unwrap();
        assert_eq!(back.into_identity().unwrap().verification_key(), id.verification_key());

        let public: PublicKeyFile = serde_json::from_str(&json).unwrap();
        assert_eq!(public, id.public_file());
        assert_eq!(public.key(), id.verification_key());
        let mut tampered = id.to_file();
        tampered.public_key[0] ^= 1;
        assert!(tampered.into_identity().is_err());
    }

    #[test]
    fn rejects_garbage() {
        let key = generate_identity("X", None).verification_key();
        assert!(!key.verify(b"m", &[0u8; 10]));
        let other = VerificationKey { alg: "rsa".into(), bytes: key.bytes.clone() };
        assert!(!other.verify(b"m", &generate_identity("X", None).sign(b"m")));
    }
}
