//! Short-time Fourier transform: windowing, one-sided spectra, overlap-add
//! resynthesis and a streaming multichannel framer.

use std::collections::VecDeque;
use std::sync::Arc;

use num_traits::Zero;
use rustfft::{Fft, FftPlanner};

use crate::num::{Real, C};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Window {
    Hann,
    SqrtHann,
    Rectangular,
}

/// Periodic window of length `n`.
pub fn window<T: Real>(kind: Window, n: usize) -> Vec<T> {
    let nn = T::of(n as f64);
    (0..n)
        .map(|i| {
            let hann = T::of(0.5) - T::of(0.5) * (T::TAU() * T::of(i as f64) / nn).cos();
            match kind {
                Window::Hann => hann,
                Window::SqrtHann => hann.max(T::zero()).sqrt(),
                Window::Rectangular => T::one(),
            }
        })
        .collect()
}

pub struct Stft<T: Real> {
    size: usize,
    hop: usize,
    window: Vec<T>,
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
}

impl<T: Real> std::fmt::Debug for Stft<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Stft")
            .field("size", &self.size)
            .field("hop", &self.hop)
            .finish()
    }
}

impl<T: Real> Stft<T> {
    pub fn new(size: usize, hop: usize, kind: Window) -> Self {
        assert!(size > 0 && size % 2 == 0, "fft size must be positive and even");
        assert!(hop > 0 && hop <= size, "hop must be in 1..=size");
        let mut planner = FftPlanner::new();
        Self {
            size,
            hop,
            window: window(kind, size),
            forward: planner.plan_fft_forward(size),
            inverse: planner.plan_fft_inverse(size),
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn hop(&self) -> usize {
        self.hop
    }

    pub fn num_bins(&self) -> usize {
        self.size / 2 + 1
    }

    pub fn window(&self) -> &[T] {
        &self.window
    }

    /// One-sided spectrum of a windowed frame of exactly `size` samples.
    pub fn analyze(&self, frame: &[T]) -> Vec<C<T>> {
        assert_eq!(frame.len(), self.size);
        let mut buf: Vec<C<T>> = frame
            .iter()
            .zip(&self.window)
            .map(|(x, w)| C::new(*x * *w, T::zero()))
            .collect();
        self.forward.process(&mut buf);
        buf.truncate(self.num_bins());
        buf
    }

    /// Real frame from a one-sided spectrum, with the synthesis window
    /// applied (no overlap-add normalization).
    pub fn synthesize(&self, half: &[C<T>]) -> Vec<T> {
        assert_eq!(half.len(), self.num_bins());
        let n = self.size;
        let mut buf = vec![C::zero(); n];
        buf[..half.len()].copy_from_slice(half);
        // DC and Nyquist must be real for a real signal
        buf[0].im = T::zero();
        buf[n / 2].im = T::zero();
        for k in 1..n / 2 {
            buf[n - k] = half[k].conj();
        }
        self.inverse.process(&mut buf);
        let scale = T::one() / T::of(n as f64);
        buf.iter()
            .zip(&self.window)
            .map(|(x, w)| x.re * scale * *w)
            .collect()
    }

    /// Sum of `analysis · synthesis` window products across overlapping
    /// frames; constant for the supported hop/window pairs.
    pub fn ola_gain(&self) -> T {
        let mut acc = vec![T::zero(); self.hop];
        for (i, w) in self.window.iter().enumerate() {
            acc[i % self.hop] += *w * *w;
        }
        acc.iter().fold(T::zero(), |a, b| a + *b) / T::of(self.hop as f64)
    }

    /// Filters `signal` by per-frame spectral processing followed by
    /// overlap-add. `process` receives the frame index and the one-sided
    /// spectrum and returns one spectrum per output channel. Output has the
    /// same length as the input.
    pub fn process_ola<F>(&self, signal: &[T], channels: usize, mut process: F) -> Vec<Vec<T>>
    where
        F: FnMut(usize, &[C<T>]) -> Vec<Vec<C<T>>>,
    {
        let n = self.size;
        let pad = n;
        let padded_len = signal.len() + 2 * pad;
        let mut padded = vec![T::zero(); padded_len];
        padded[pad..pad + signal.len()].copy_from_slice(signal);
        let mut out = vec![vec![T::zero(); padded_len]; channels];
        let gain = T::one() / self.ola_gain();
        let mut start = 0;
        let mut frame_idx = 0;
        while start + n <= padded_len {
            let spec = self.analyze(&padded[start..start + n]);
            let outs = process(frame_idx, &spec);
            assert_eq!(outs.len(), channels, "one spectrum per channel");
            for (ch, s) in outs.iter().enumerate() {
                let frame = self.synthesize(s);
                for (o, x) in out[ch][start..start + n].iter_mut().zip(frame) {
                    *o += x * gain;
                }
            }
            start += self.hop;
            frame_idx += 1;
        }
        out.into_iter()
            .map(|ch| ch[pad..pad + signal.len()].to_vec())
            .collect()
    }
}

/// Cuts a multichannel stream into overlapping frames regardless of how the
/// input is chunked.
#[derive(Debug, Clone)]
pub struct Framer<T> {
    size: usize,
    hop: usize,
    buffers: Vec<VecDeque<T>>,
    next_frame: usize,
}

impl<T: Copy + Zero> Framer<T> {
    pub fn new(channels: usize, size: usize, hop: usize) -> Self {
        Self {
            size,
            hop,
            buffers: vec![VecDeque::with_capacity(2 * size); channels],
            next_frame: 0,
        }
    }

    pub fn channels(&self) -> usize {
        self.buffers.len()
    }

    /// Appends channel-major samples (`chunk[ch][i]`).
    pub fn push(&mut self, chunk: &[Vec<T>]) {
        assert_eq!(chunk.len(), self.buffers.len(), "channel count mismatch");
        for (buf, ch) in self.buffers.iter_mut().zip(chunk) {
            buf.extend(ch.iter().copied());
        }
    }

    /// Next complete frame as `(frame_index, frame[ch][i])`.
    pub fn next_frame(&mut self) -> Option<(usize, Vec<Vec<T>>)> {
        if self.buffers.iter().any(|b| b.len() < self.size) {
            return None;
        }
        let frame = self
            .buffers
            .iter()
            .map(|b| b.iter().take(self.size).copied().collect())
            .collect();
        for b in &mut self.buffers {
            b.drain(..self.hop);
        }
        let idx = self.next_frame;
        self.next_frame += 1;
        Some((idx, frame))
    }
}
