use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_pcg::Pcg64;

/// Names an independent random-number substream.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StreamKey {
    /// Arrivals of one patient class into one facility or catchment.
    Arrivals { facility: u16, class: u8 },
    /// Service draws at one station of one facility.
    Service { facility: u16, station: u8 },
    Routing { facility: u16 },
    Compliance,
    Oracle,
    /// The scored patient's own draws inside one candidate's clone.
    OracleSample { facility: u16 },
}

impl StreamKey {
    fn code(self) -> u64 {
        match self {
            StreamKey::Arrivals { facility, class } => {
                (1 << 56) | ((facility as u64) << 8) | class as u64
            }
            StreamKey::Service { facility, station } => {
                (2 << 56) | ((facility as u64) << 8) | station as u64
            }
            StreamKey::Routing { facility } => (3 << 56) | facility as u64,
            StreamKey::Compliance => 4 << 56,
            StreamKey::Oracle => 5 << 56,
            StreamKey::OracleSample { facility } => (6 << 56) | facility as u64,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for `(master, key, index)`; distinct keys give unrelated generators.
pub fn derive_seed(master: u64, key: StreamKey, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ key.code()) ^ splitmix64(index.wrapping_add(1)))
}

/// Named, lazily created PCG substreams derived from one master seed.
///
/// Each substream is an independent generator, so the order in which
/// different streams are drawn from never changes any one stream's sequence.
#[derive(Clone, Debug)]
pub struct RngStreams {
    master_seed: u64,
    streams: BTreeMap<StreamKey, Pcg64>,
}

impl RngStreams {
    pub fn new(master_seed: u64) -> Self {
        RngStreams {
            master_seed,
            streams: BTreeMap::new(),
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream(&mut self, key: StreamKey) -> &mut Pcg64 {
        let master = self.master_seed;
        self.streams
            .entry(key)
            .or_insert_with(|| Pcg64::seed_from_u64(derive_seed(master, key, 0)))
    }

    /// A fresh generator for `(key, index)` that does not touch any stored stream.
    pub fn fork(&self, key: StreamKey, index: u64) -> Pcg64 {
        Pcg64::seed_from_u64(derive_seed(self.master_seed, key, index.wrapping_add(1) << 1))
    }
}
