//! Counter-based random streams.
//!
//! Every draw is a pure function of `(seed, stream id, counter)` through the
//! Philox4x32-10 bijection, so a Monte Carlo job can hand independent streams
//! to workers without sharing state and still reproduce bit-for-bit.

const PHILOX_M0: u32 = 0xD251_1F53;
const PHILOX_M1: u32 = 0xCD9E_8D57;
const PHILOX_W0: u32 = 0x9E37_79B9;
const PHILOX_W1: u32 = 0xBB67_AE85;

#[inline]
fn mulhilo(a: u32, b: u32) -> (u32, u32) {
    let p = u64::from(a) * u64::from(b);
    ((p >> 32) as u32, p as u32)
}

/// The Philox4x32 block function with 10 rounds.
pub fn philox4x32_10(ctr: [u32; 4], key: [u32; 2]) -> [u32; 4] {
    let mut c = ctr;
    let mut k = key;
    for round in 0..10 {
        if round > 0 {
            k[0] = k[0].wrapping_add(PHILOX_W0);
            k[1] = k[1].wrapping_add(PHILOX_W1);
        }
        let (hi0, lo0) = mulhilo(PHILOX_M0, c[0]);
        let (hi1, lo1) = mulhilo(PHILOX_M1, c[2]);
        c = [hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0];
    }
    c
}

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A position in the keyed counter space. Cloning a stream duplicates its
/// position, so clones replay the same values.
#[derive(Debug, Clone)]
pub struct Stream {
    seed: u64,
    stream_id: u64,
    counter: u64,
    buf: [u32; 4],
    buf_pos: usize,
}

impl Stream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Stream {
            seed,
            stream_id,
            counter: 0,
            buf: [0; 4],
            buf_pos: 4,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Child stream for sub-task `child`. Children of distinct parents or
    /// distinct child indices land on unrelated stream ids.
    pub fn split(&self, child: u64) -> Stream {
        let id = mix64(self.stream_id ^ mix64(child.wrapping_add(0x6A09_E667_F3BC_C909)));
        Stream::new(self.seed, id)
    }

    fn refill(&mut self) {
        let ctr = [
            self.counter as u32,
            (self.counter >> 32) as u32,
            self.stream_id as u32,
            (self.stream_id >> 32) as u32,
        ];
        let key = [self.seed as u32, (self.seed >> 32) as u32];
        self.buf = philox4x32_10(ctr, key);
        self.counter = self.counter.wrapping_add(1);
        self.buf_pos = 0;
    }

    pub fn next_u32(&mut self) -> u32 {
        if self.buf_pos >= 4 {
            self.refill();
        }
        let v = self.buf[self.buf_pos];
        self.buf_pos += 1;
        v
    }

    pub fn next_u64(&mut self) -> u64 {
        let lo = u64::from(self.next_u32());
        let hi = u64::from(self.next_u32());
        (hi << 32) | lo
    }

    /// Uniform on the open interval (0, 1).
    pub fn uniform(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Fair sign in {-1, +1}.
    pub fn sign(&mut self) -> f64 {
        if self.next_u32() & 1 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    pub fn exponential(&mut self) -> f64 {
        -self.uniform().ln()
    }

    /// Standard normal by the Marsaglia polar method. The second variate of
    /// each pair is discarded so the stream position stays simple.
    pub fn normal(&mut self) -> f64 {
        loop {
            let u = 2.0 * self.uniform() - 1.0;
            let v = 2.0 * self.uniform() - 1.0;
            let s = u * u + v * v;
            if s > 0.0 && s < 1.0 {
                return u * (-2.0 * s.ln() / s).sqrt();
            }
        }
    }

    /// Gamma(shape, 1) by Marsaglia-Tsang squeeze/rejection. Shapes below one
    /// are boosted: draw Gamma(shape + 1) and multiply by U^(1/shape).
    pub fn gamma(&mut self, shape: f64) -> f64 {
        debug_assert!(shape > 0.0);
        if shape < 1.0 {
            let g = self.gamma(shape + 1.0);
            let u = self.uniform();
            return g * u.powf(1.0 / shape);
        }
        let d = shape - 1.0 / 3.0;
        let c = 1.0 / (9.0 * d).sqrt();
        loop {
            let x = self.normal();
            let v = 1.0 + c * x;
            if v <= 0.0 {
                continue;
            }
            let v = v * v * v;
            let u = self.uniform();
            let x2 = x * x;
            if u < 1.0 - 0.0331 * x2 * x2 {
                return d * v;
            }
            if u.ln() < 0.5 * x2 + d * (1.0 - v + v.ln()) {
                return d * v;
            }
        }
    }

    /// Standard Laplace variate (density e^{-|x|}/2).
    pub fn laplace(&mut self) -> f64 {
        self.sign() * self.exponential()
    }
}
