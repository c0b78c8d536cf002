//! Content hashes and per-stage seed expansion.

use sha2::{Digest, Sha256};

use crate::corpus::CommentRecord;

fn fold(digest: &[u8]) -> u64 {
    let mut b = [0u8; 8];
    b.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(b)
}

fn field(h: &mut Sha256, s: &str) {
    h.update((s.len() as u64).to_le_bytes());
    h.update(s.as_bytes());
}

/// Hash over every field of every record, in order.
pub fn corpus_hash(records: &[CommentRecord]) -> u64 {
    let mut h = Sha256::new();
    for r in records {
        field(&mut h, &r.id);
        field(&mut h, &r.user_id);
        field(&mut h, &r.forum_id);
        field(&mut h, &r.text);
        h.update([r.label.map_or(255u8, |l| l as u8)]);
    }
    fold(&h.finalize())
}

pub fn hash_str(s: &str) -> u64 {
    fold(&Sha256::digest(s.as_bytes()))
}

/// Identifier hash used for leakage checks between splits.
pub fn id_hash(id: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(b"comment-id:");
    h.update(id.as_bytes());
    fold(&h.finalize())
}

/// Seed for one named stage, derived from the run seed.
pub fn stage_seed(seed: u64, stage: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(stage.as_bytes());
    fold(&h.finalize())
}
