use rustc_hash::FxHashMap;

use super::VoxelKey;

pub(crate) const CHUNK_BITS: i32 = 3;
pub(crate) const CHUNK_SIDE: i32 = 1 << CHUNK_BITS;
pub(crate) const CHUNK_VOLUME: usize = (CHUNK_SIDE * CHUNK_SIDE * CHUNK_SIDE) as usize;
const LOCAL_MASK: i32 = CHUNK_SIDE - 1;

pub(crate) type ChunkKey = [i32; 3];

/// Splits a voxel key into its chunk key and the index inside the chunk.
#[inline]
pub(crate) fn split(key: [i32; 3]) -> (ChunkKey, usize) {
    let ck = [key[0] >> CHUNK_BITS, key[1] >> CHUNK_BITS, key[2] >> CHUNK_BITS];
    let idx = ((key[0] & LOCAL_MASK)
        | ((key[1] & LOCAL_MASK) << CHUNK_BITS)
        | ((key[2] & LOCAL_MASK) << (2 * CHUNK_BITS))) as usize;
    (ck, idx)
}

#[inline]
pub(crate) fn join(ck: ChunkKey, idx: usize) -> VoxelKey {
    let i = idx as i32;
    VoxelKey::new(
        (ck[0] << CHUNK_BITS) | (i & LOCAL_MASK),
        (ck[1] << CHUNK_BITS) | ((i >> CHUNK_BITS) & LOCAL_MASK),
        (ck[2] << CHUNK_BITS) | ((i >> (2 * CHUNK_BITS)) & LOCAL_MASK),
    )
}

/// Occupancy block of 8x8x8 voxels. `NaN` log-odds marks a never-observed
/// voxel; `stamp` deduplicates updates within one integrated cloud.
#[derive(Clone)]
pub(crate) struct Chunk {
    pub(crate) log_odds: [f32; CHUNK_VOLUME],
    pub(crate) stamp: [u32; CHUNK_VOLUME],
}

impl Chunk {
    fn empty() -> Self {
        Chunk {
            log_odds: [f32::NAN; CHUNK_VOLUME],
            stamp: [0; CHUNK_VOLUME],
        }
    }
}

/// Hashed blocks of dense chunks: sparse at the block level, array speed
/// inside a block.
#[derive(Clone, Default)]
pub(crate) struct ChunkStore {
    index: FxHashMap<ChunkKey, u32>,
    chunks: Vec<Chunk>,
    keys: Vec<ChunkKey>,
}

impl ChunkStore {
    #[inline]
    pub(crate) fn find(&self, ck: &ChunkKey) -> Option<u32> {
        self.index.get(ck).copied()
    }

    #[inline]
    pub(crate) fn find_or_insert(&mut self, ck: ChunkKey) -> u32 {
        if let Some(&i) = self.index.get(&ck) {
            return i;
        }
        let i = self.chunks.len() as u32;
        self.chunks.push(Chunk::empty());
        self.keys.push(ck);
        self.index.insert(ck, i);
        i
    }

    #[inline]
    pub(crate) fn chunk(&self, i: u32) -> &Chunk {
        &self.chunks[i as usize]
    }

    #[inline]
    pub(crate) fn chunk_mut(&mut self, i: u32) -> &mut Chunk {
        &mut self.chunks[i as usize]
    }

    pub(crate) fn log_odds(&self, key: [i32; 3]) -> Option<f32> {
        let (ck, idx) = split(key);
        let l = self.chunk(self.find(&ck)?).log_odds[idx];
        (!l.is_nan()).then_some(l)
    }

    /// Every observed voxel as `(key, log_odds)`, in chunk-creation order.
    pub(crate) fn observed(&self) -> impl Iterator<Item = (VoxelKey, f32)> + '_ {
        self.keys.iter().zip(&self.chunks).flat_map(|(ck, chunk)| {
            chunk
                .log_odds
                .iter()
                .enumerate()
                .filter(|(_, l)| !l.is_nan())
                .map(move |(i, &l)| (join(*ck, i), l))
        })
    }
}

/// Remembers the last chunk touched so that consecutive cells of a ray walk
/// skip the hash lookup.
pub(crate) struct ChunkCursor {
    last: Option<(ChunkKey, Option<u32>)>,
}

impl ChunkCursor {
    pub(crate) fn new() -> Self {
        Self { last: None }
    }

    #[inline]
    pub(crate) fn find(&mut self, store: &ChunkStore, ck: ChunkKey) -> Option<u32> {
        match self.last {
            Some((k, i)) if k == ck => i,
            _ => {
                let i = store.find(&ck);
                self.last = Some((ck, i));
                i
            }
        }
    }

    #[inline]
    pub(crate) fn find_or_insert(&mut self, store: &mut ChunkStore, ck: ChunkKey) -> u32 {
        match self.last {
            Some((k, Some(i))) if k == ck => i,
            _ => {
                let i = store.find_or_insert(ck);
                self.last = Some((ck, Some(i)));
                i
            }
        }
    }
}
