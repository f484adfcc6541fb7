use thiserror::Error;

/// Longest frame accepted on any connection, newline included.
pub const MAX_LINE_LEN: usize = 1024;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FramingError {
    #[error("line exceeds {0} bytes without a newline")]
    TooLong(usize),
}

/// Reassembles newline-terminated frames from arbitrarily split chunks.
#[derive(Debug)]
pub struct LineFramer {
    buf: Vec<u8>,
    max_len: usize,
}

impl Default for LineFramer {
    fn default() -> Self {
        Self::new(MAX_LINE_LEN)
    }
}

impl LineFramer {
    pub fn new(max_len: usize) -> Self {
        Self {
            buf: Vec::new(),
            max_len,
        }
    }

    pub fn push(&mut self, chunk: &[u8]) {
        self.buf.extend_from_slice(chunk);
    }

    /// Pops the next complete line, newline included.
    pub fn next_line(&mut self) -> Result<Option<Vec<u8>>, FramingError> {
        match self.buf.iter().position(|&b| b == b'\n') {
            Some(i) if i < self.max_len => Ok(Some(self.buf.drain(..=i).collect())),
            Some(_) => Err(FramingError::TooLong(self.max_len)),
            None if self.buf.len() >= self.max_len => Err(FramingError::TooLong(self.max_len)),
            None => Ok(None),
        }
    }

    pub fn pending(&self) -> usize {
        self.buf.len()
    }
}
