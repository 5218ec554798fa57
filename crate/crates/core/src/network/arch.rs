use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Identity,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LayerSpec {
    pub kernel_size: usize,
    pub in_channels: usize,
    pub out_channels: usize,
    pub activation: Activation,
}

/// Layer list of one convolutional operator (J, G or a mirrored counterpart).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConvStackSpec {
    layers: Vec<LayerSpec>,
}

impl ConvStackSpec {
    pub fn new(layers: Vec<LayerSpec>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::param("a conv stack needs at least one layer"));
        }
        for l in &layers {
            if l.kernel_size % 2 == 0 || l.in_channels == 0 || l.out_channels == 0 {
                return Err(Error::param(format!("invalid layer {l:?}")));
            }
        }
        for pair in layers.windows(2) {
            if pair[0].out_channels != pair[1].in_channels {
                return Err(Error::param(format!(
                    "layer chain breaks: {} outputs feed {} inputs",
                    pair[0].out_channels, pair[1].in_channels
                )));
            }
        }
        Ok(Self { layers })
    }

    /// `depth` layers `in → hidden → … → hidden → out`, ReLU on all but the last.
    pub fn chain(
        in_channels: usize,
        hidden: usize,
        out_channels: usize,
        depth: usize,
        kernel_size: usize,
    ) -> Result<Self> {
        if depth == 0 {
            return Err(Error::param("stack depth must be >= 1"));
        }
        let layers = (0..depth)
            .map(|i| LayerSpec {
                kernel_size,
                in_channels: if i == 0 { in_channels } else { hidden },
                out_channels: if i + 1 == depth { out_channels } else { hidden },
                activation: if i + 1 == depth {
                    Activation::Identity
                } else {
                    Activation::Relu
                },
            })
            .collect();
        Self::new(layers)
    }

    /// Same layers in reverse order with channel counts swapped; activation
    /// placement stays "ReLU on all but the last".
    pub fn mirrored(&self) -> Self {
        let n = self.layers.len();
        let layers = self
            .layers
            .iter()
            .rev()
            .enumerate()
            .map(|(i, l)| LayerSpec {
                kernel_size: l.kernel_size,
                in_channels: l.out_channels,
                out_channels: l.in_channels,
                activation: if i + 1 == n {
                    Activation::Identity
                } else {
                    Activation::Relu
                },
            })
            .collect();
        Self { layers }
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn in_channels(&self) -> usize {
        self.layers[0].in_channels
    }

    pub fn out_channels(&self) -> usize {
        self.layers[self.layers.len() - 1].out_channels
    }
}

/// Widths and kernel sizes shared by every phase.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Architecture {
    pub coils: usize,
    pub depth: usize,
    pub combiner_filters: usize,
    pub combiner_kernel: usize,
    pub encoder_filters: usize,
    pub encoder_kernel: usize,
    /// Channels of the sparse feature map `G(J(b))` that is shrunk.
    pub sparse_channels: usize,
}

impl Architecture {
    /// J: 4 layers of 3×3 with 64 filters; G: 4 layers of 9×9 with 32 filters;
    /// both end in a single channel.
    pub fn reference(coils: usize) -> Self {
        Self {
            coils,
            depth: 4,
            combiner_filters: 64,
            combiner_kernel: 3,
            encoder_filters: 32,
            encoder_kernel: 9,
            sparse_channels: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.combiner()?;
        self.encoder()?;
        Ok(())
    }

    /// J: `coils → 1`.
    pub fn combiner(&self) -> Result<ConvStackSpec> {
        ConvStackSpec::chain(
            self.coils,
            self.combiner_filters,
            1,
            self.depth,
            self.combiner_kernel,
        )
    }

    /// G: `1 → sparse_channels`.
    pub fn encoder(&self) -> Result<ConvStackSpec> {
        ConvStackSpec::chain(
            1,
            self.encoder_filters,
            self.sparse_channels,
            self.depth,
            self.encoder_kernel,
        )
    }

    /// G̃: mirror of G.
    pub fn decoder(&self) -> Result<ConvStackSpec> {
        Ok(self.encoder()?.mirrored())
    }

    /// J̃: mirror of J, `1 → coils`.
    pub fn expander(&self) -> Result<ConvStackSpec> {
        Ok(self.combiner()?.mirrored())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_shapes() {
        let arch = Architecture::reference(4);
        let j = arch.combiner().unwrap();
        let ch: Vec<_> = j.layers().iter().map(|l| (l.in_channels, l.out_channels)).collect();
        assert_eq!(ch, [(4, 64), (64, 64), (64, 64), (64, 1)]);
        assert!(j.layers().iter().all(|l| l.kernel_size == 3));
        let acts: Vec<_> = j.layers().iter().map(|l| l.activation).collect();
        assert_eq!(
            acts,
            [Activation::Relu, Activation::Relu, Activation::Relu, Activation::Identity]
        );

        let g = arch.encoder().unwrap();
        assert!(g.layers().iter().all(|l| l.kernel_size == 9));
        assert_eq!(g.layers()[1].out_channels, 32);
        assert_eq!(g.out_channels(), 1);

        let jt = arch.expander().unwrap();
        let ch: Vec<_> = jt.layers().iter().map(|l| (l.in_channels, l.out_channels)).collect();
        assert_eq!(ch, [(1, 64), (64, 64), (64, 64), (64, 4)]);
        assert_eq!(jt.layers()[3].activation, Activation::Identity);
        assert_eq!(arch.decoder().unwrap().in_channels(), 1);
    }

    #[test]
    fn broken_chains_are_rejected() {
        let l = |i, o| LayerSpec {
            kernel_size: 3,
            in_channels: i,
            out_channels: o,
            activation: Activation::Relu,
        };
        assert!(ConvStackSpec::new(vec![l(1, 4), l(3, 1)]).is_err());
        assert!(ConvStackSpec::new(vec![]).is_err());
        assert!(ConvStackSpec::chain(1, 4, 1, 0, 3).is_err());
        assert!(ConvStackSpec::chain(1, 4, 1, 2, 4).is_err());
    }
}
