//! One-time commitment signatures built on the walk hash.
//!
//! The default scheme is Lamport-style: the secret key is a pair of random
//! subkeys per message-digest bit, the public key is the walk-hash
//! commitment of every subkey, and a signature reveals the subkey matching
//! each digest bit. Verification recomputes the commitments. The signed
//! digest is the full walk-hash output, so detecting a message mutation
//! reduces to the two digests differing anywhere. The scheme is
//! classically simulable but one-time: signing two different messages
//! under one key leaks subkeys.

use rand::Rng;

use crate::block::{NodeId, Transaction};
use crate::hash::{hash, HashParams};
use crate::SimRng;

/// Digest bits signed per message: every bit of the walk digest.
/// Compressing the digest (prefixes, xor folds) loses most of its entropy
/// because probability bytes are strongly correlated across positions, so
/// the whole digest is signed instead.
pub const MESSAGE_BITS: usize = 512;
/// Bytes per secret subkey.
pub const SUBKEY_BYTES: usize = 8;

/// Opaque key encodings produced by a [`SignatureScheme`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyPair {
    pub secret: Vec<u8>,
    pub public: Vec<u8>,
}

/// Pluggable signature model. Implementations must bind the full message:
/// any single-byte mutation after signing has to fail verification.
pub trait SignatureScheme {
    fn generate_keypair(&self, rng: &mut SimRng) -> KeyPair;
    fn sign(&self, secret: &[u8], message: &[u8]) -> Vec<u8>;
    fn verify(&self, public: &[u8], message: &[u8], signature: &[u8]) -> bool;
}

/// The default walk-hash commitment scheme.
///
/// Keys hold `2 · MESSAGE_BITS` subkeys of [`SUBKEY_BYTES`] bytes committed
/// by their walk-hash digests on an 8-site cycle. The signed message digest
/// is the full 64-byte walk hash of the message, bit by bit.
#[derive(Debug, Clone)]
pub struct WalkCommitmentScheme {
    params: HashParams,
}

impl Default for WalkCommitmentScheme {
    fn default() -> Self {
        // cycle 8 is internally valid for any parameter check
        let params = HashParams::for_cycle(8).expect("cycle 8 params");
        Self { params }
    }
}

impl WalkCommitmentScheme {
    fn commitment_len(&self) -> usize {
        self.params.digest_len()
    }

    fn secret_len(&self) -> usize {
        2 * MESSAGE_BITS * SUBKEY_BYTES
    }

    fn public_len(&self) -> usize {
        2 * MESSAGE_BITS * self.commitment_len()
    }

    /// The signed digest: every bit of the message's walk hash, MSB-first
    /// within each byte.
    fn message_bits(&self, message: &[u8]) -> Vec<u8> {
        let msg: &[u8] = if message.is_empty() { &[0] } else { message };
        let digest = hash(msg, &self.params).expect("non-empty message");
        debug_assert_eq!(digest.len() * 8, MESSAGE_BITS);
        (0..MESSAGE_BITS)
            .map(|i| (digest.as_bytes()[i / 8] >> (7 - i % 8)) & 1)
            .collect()
    }

    fn subkey<'a>(&self, secret: &'a [u8], bit_index: usize, bit: u8) -> &'a [u8] {
        let slot = bit_index * 2 + bit as usize;
        &secret[slot * SUBKEY_BYTES..(slot + 1) * SUBKEY_BYTES]
    }
}

impl SignatureScheme for WalkCommitmentScheme {
    fn generate_keypair(&self, rng: &mut SimRng) -> KeyPair {
        let mut secret = vec![0u8; self.secret_len()];
        rng.fill(secret.as_mut_slice());
        let mut public = Vec::with_capacity(self.public_len());
        for slot in 0..2 * MESSAGE_BITS {
            let subkey = &secret[slot * SUBKEY_BYTES..(slot + 1) * SUBKEY_BYTES];
            let commitment = hash(subkey, &self.params).expect("non-empty subkey");
            public.extend_from_slice(commitment.as_bytes());
        }
        KeyPair { secret, public }
    }

    fn sign(&self, secret: &[u8], message: &[u8]) -> Vec<u8> {
        assert_eq!(secret.len(), self.secret_len(), "malformed secret key");
        let mut signature = Vec::with_capacity(MESSAGE_BITS * SUBKEY_BYTES);
        for (i, &bit) in self.message_bits(message).iter().enumerate() {
            signature.extend_from_slice(self.subkey(secret, i, bit));
        }
        signature
    }

    fn verify(&self, public: &[u8], message: &[u8], signature: &[u8]) -> bool {
        if public.len() != self.public_len()
            || signature.len() != MESSAGE_BITS * SUBKEY_BYTES
        {
            return false;
        }
        let c_len = self.commitment_len();
        for (i, &bit) in self.message_bits(message).iter().enumerate() {
            let revealed = &signature[i * SUBKEY_BYTES..(i + 1) * SUBKEY_BYTES];
            let commitment = hash(revealed, &self.params).expect("non-empty subkey");
            let slot = i * 2 + bit as usize;
            if commitment.as_bytes() != &public[slot * c_len..(slot + 1) * c_len] {
                return false;
            }
        }
        true
    }
}

/// Builds and signs a transaction; the signature binds every field except
/// itself (sender, receiver, payload, timestamp).
pub fn sign_transaction(
    scheme: &dyn SignatureScheme,
    secret: &[u8],
    sender: NodeId,
    receiver: NodeId,
    payload: Vec<u8>,
    timestamp_ms: u64,
) -> Transaction {
    let mut tx = Transaction {
        sender,
        receiver,
        payload,
        signature: Vec::new(),
        timestamp_ms,
    };
    tx.signature = scheme.sign(secret, &tx.signing_bytes());
    tx
}

/// Verifies a transaction's signature under the claimed sender's key.
pub fn verify_transaction(
    scheme: &dyn SignatureScheme,
    public: &[u8],
    tx: &Transaction,
) -> bool {
    scheme.verify(public, &tx.signing_bytes(), &tx.signature)
}
