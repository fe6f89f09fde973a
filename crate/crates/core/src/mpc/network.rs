use super::MpcError;

/// Per-superstep message meter.
#[derive(Debug, Clone)]
pub struct Network {
    space: u64,
    enforce: bool,
    io: Vec<u64>,
    touched: Vec<usize>,
    superstep: u64,
    peak_io: u64,
    peak_storage: u64,
}

impl Network {
    pub fn new(space: u64, enforce: bool) -> Self {
        Network { space, enforce, io: Vec::new(), touched: Vec::new(), superstep: 0, peak_io: 0, peak_storage: 0 }
    }

    fn bump(&mut self, m: usize, words: u64) {
        if m >= self.io.len() {
            self.io.resize(m + 1, 0);
        }
        if self.io[m] == 0 {
            self.touched.push(m);
        }
        self.io[m] += words;
    }

    /// Both endpoints are charged. Local moves are free.
    pub fn send(&mut self, from: usize, to: usize, words: u64) {
        if from == to || words == 0 {
            return;
        }
        self.bump(from, words);
        self.bump(to, words);
    }

    /// Ends the superstep, checking every machine's traffic.
    pub fn barrier(&mut self) -> Result<(), MpcError> {
        let mut worst = (0usize, 0u64);
        for &m in &self.touched {
            if self.io[m] > worst.1 {
                worst = (m, self.io[m]);
            }
            self.io[m] = 0;
        }
        self.touched.clear();
        self.superstep += 1;
        self.peak_io = self.peak_io.max(worst.1);
        if self.enforce && worst.1 > self.space {
            return Err(MpcError::IoExceeded { superstep: self.superstep, machine: worst.0, words: worst.1, space: self.space });
        }
        Ok(())
    }

    /// Records resident words on a machine.
    pub fn store(&mut self, machine: usize, words: u64) -> Result<(), MpcError> {
        self.peak_storage = self.peak_storage.max(words);
        if self.enforce && words > self.space {
            return Err(MpcError::CapacityExceeded { needed: words, available: self.space });
        }
        let _ = machine;
        Ok(())
    }

    pub fn supersteps(&self) -> u64 {
        self.superstep
    }

    pub fn peak_io(&self) -> u64 {
        self.peak_io
    }

    pub fn peak_storage(&self) -> u64 {
        self.peak_storage
    }

    pub fn space(&self) -> u64 {
        self.space
    }
}
