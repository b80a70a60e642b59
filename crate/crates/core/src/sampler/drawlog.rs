//! Versioned draw log: `EDPMDLOG`, a little-endian `u32` format version,
//! then length-prefixed JSON frames. The first frame is the header, each
//! later frame is one [`PosteriorDraw`].

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::data::Layout;
use crate::error::{Error, Result};

use super::{PosteriorDraw, SamplerConfig};

pub const MAGIC: &[u8; 8] = b"EDPMDLOG";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrawLogHeader {
    pub layout: Layout,
    pub config: SamplerConfig,
}

fn io_err(e: std::io::Error) -> Error {
    Error::DrawLog(e.to_string())
}

fn write_frame<W: Write, T: Serialize>(w: &mut W, value: &T) -> Result<()> {
    let bytes = serde_json::to_vec(value).map_err(|e| Error::DrawLog(e.to_string()))?;
    let len = u32::try_from(bytes.len()).map_err(|_| Error::DrawLog("record too large".into()))?;
    w.write_all(&len.to_le_bytes()).map_err(io_err)?;
    w.write_all(&bytes).map_err(io_err)
}

pub struct DrawLogWriter<W: Write> {
    inner: W,
    written: usize,
}

impl<W: Write> DrawLogWriter<W> {
    pub fn new(mut inner: W, header: &DrawLogHeader) -> Result<Self> {
        inner.write_all(MAGIC).map_err(io_err)?;
        inner.write_all(&FORMAT_VERSION.to_le_bytes()).map_err(io_err)?;
        write_frame(&mut inner, header)?;
        Ok(DrawLogWriter { inner, written: 0 })
    }

    pub fn write_draw(&mut self, draw: &PosteriorDraw) -> Result<()> {
        write_frame(&mut self.inner, draw)?;
        self.written += 1;
        Ok(())
    }

    pub fn written(&self) -> usize {
        self.written
    }

    pub fn finish(mut self) -> Result<W> {
        self.inner.flush().map_err(io_err)?;
        Ok(self.inner)
    }
}

pub struct DrawLogReader<R: Read> {
    inner: R,
    header: DrawLogHeader,
}

/// Read a frame; `Ok(None)` on a clean end of stream.
fn read_frame<R: Read>(r: &mut R) -> Result<Option<Vec<u8>>> {
    let mut len = [0u8; 4];
    let mut got = 0;
    while got < 4 {
        let k = r.read(&mut len[got..]).map_err(io_err)?;
        if k == 0 {
            return if got == 0 { Ok(None) } else { Err(Error::DrawLog("truncated frame length".into())) };
        }
        got += k;
    }
    let mut buf = vec![0u8; u32::from_le_bytes(len) as usize];
    r.read_exact(&mut buf).map_err(|_| Error::DrawLog("truncated frame".into()))?;
    Ok(Some(buf))
}

impl<R: Read> DrawLogReader<R> {
    pub fn new(mut inner: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        inner.read_exact(&mut magic).map_err(|_| Error::DrawLog("missing magic".into()))?;
        if &magic != MAGIC {
            return Err(Error::DrawLog("not a draw log".into()));
        }
        let mut v = [0u8; 4];
        inner.read_exact(&mut v).map_err(|_| Error::DrawLog("missing version".into()))?;
        let version = u32::from_le_bytes(v);
        if version != FORMAT_VERSION {
            return Err(Error::DrawLog(format!("unsupported format version {version}")));
        }
        let frame = read_frame(&mut inner)?.ok_or_else(|| Error::DrawLog("missing header".into()))?;
        let header = serde_json::from_slice(&frame).map_err(|e| Error::DrawLog(format!("header: {e}")))?;
        Ok(DrawLogReader { inner, header })
    }

    pub fn header(&self) -> &DrawLogHeader {
        &self.header
    }

    pub fn read_all(self) -> Result<(DrawLogHeader, Vec<PosteriorDraw>)> {
        let header = self.header.clone();
        let draws = self.collect::<Result<Vec<_>>>()?;
        Ok((header, draws))
    }
}

impl<R: Read> Iterator for DrawLogReader<R> {
    type Item = Result<PosteriorDraw>;

    fn next(&mut self) -> Option<Self::Item> {
        match read_frame(&mut self.inner) {
            Ok(None) => None,
            Ok(Some(buf)) => Some(serde_json::from_slice(&buf).map_err(|e| Error::DrawLog(format!("record: {e}")))),
            Err(e) => Some(Err(e)),
        }
    }
}
