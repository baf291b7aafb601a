//! Multichannel WAV I/O. Writes 32-bit float; reads float or integer PCM.

use std::path::Path;

use hound::{SampleFormat, WavSpec};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Audio {
    pub sample_rate: u32,
    /// `channels[c][n]`
    pub channels: Vec<Vec<f64>>,
}

impl Audio {
    pub fn num_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn len(&self) -> usize {
        self.channels.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn duration_s(&self) -> f64 {
        self.len() as f64 / self.sample_rate as f64
    }
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<Audio> {
    let mut reader = hound::WavReader::open(path)?;
    let spec = reader.spec();
    let nch = spec.channels as usize;
    let interleaved: Vec<f64> = match spec.sample_format {
        SampleFormat::Float => reader
            .samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>()?,
        SampleFormat::Int => {
            let scale = 1.0 / (1u64 << (spec.bits_per_sample - 1)) as f64;
            reader
                .samples::<i32>()
                .map(|s| s.map(|v| v as f64 * scale))
                .collect::<std::result::Result<_, _>>()?
        }
    };
    if nch == 0 {
        return Err(Error::DegenerateInput("WAV file has no channels".into()));
    }
    let frames = interleaved.len() / nch;
    let mut channels = vec![Vec::with_capacity(frames); nch];
    for frame in interleaved.chunks_exact(nch) {
        for (c, v) in frame.iter().enumerate() {
            channels[c].push(*v);
        }
    }
    Ok(Audio {
        sample_rate: spec.sample_rate,
        channels,
    })
}

pub fn write_wav(path: impl AsRef<Path>, audio: &Audio) -> Result<()> {
    let nch = audio.num_channels();
    if nch == 0 || nch > u16::MAX as usize {
        return Err(Error::DegenerateInput(format!("cannot write {nch} channels")));
    }
    let len = audio.len();
    if audio.channels.iter().any(|c| c.len() != len) {
        return Err(Error::DegenerateInput("channels differ in length".into()));
    }
    let spec = WavSpec {
        channels: nch as u16,
        sample_rate: audio.sample_rate,
        bits_per_sample: 32,
        sample_format: SampleFormat::Float,
    };
    let mut w = hound::WavWriter::create(path, spec)?;
    for n in 0..len {
        for ch in &audio.channels {
            w.write_sample(ch[n] as f32)?;
        }
    }
    w.finalize()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.wav");
        let audio = Audio {
            sample_rate: 16000,
            channels: vec![vec![0.0, 0.5, -0.25], vec![1.0, -1.0, 0.125]],
        };
        write_wav(&path, &audio).unwrap();
        assert_eq!(read_wav(&path).unwrap(), audio);
    }

    #[test]
    fn reads_integer_pcm() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("i.wav");
        let spec = WavSpec {
            channels: 1,
            sample_rate: 8000,
            bits_per_sample: 16,
            sample_format: SampleFormat::Int,
        };
        let mut w = hound::WavWriter::create(&path, spec).unwrap();
        w.write_sample(16384i16).unwrap();
        w.write_sample(-32768i16).unwrap();
        w.finalize().unwrap();
        let a = read_wav(&path).unwrap();
        assert_eq!(a.channels, vec![vec![0.5, -1.0]]);
    }
}
