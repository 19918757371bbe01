use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::network::{BlockConfig, CascadeConfig, Donet};
use crate::scalar::Scalar;
use crate::tensor::{ComplexTensor, RealTensor};

pub fn randomize<T: Scalar>(model: &mut Donet<T>, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for (name, t) in model.tensors_mut() {
        let gamma = name.ends_with("gamma");
        for v in t.data_mut() {
            *v = T::lit(if gamma { rng.random_range(0.5..1.5) } else { rng.random_range(-0.4..0.4) });
        }
    }
    for (name, t) in model.buffers_mut() {
        let var = name.ends_with("var");
        for v in t.data_mut() {
            *v = T::lit(if var { rng.random_range(0.5..1.5) } else { rng.random_range(-0.2..0.2) });
        }
    }
}

pub fn random_complex<T: Scalar>(rng: &mut ChaCha8Rng, shape: [usize; 4]) -> ComplexTensor<T> {
    ComplexTensor {
        re: RealTensor::from_fn(shape, |_| T::lit(rng.random_range(-1.0..1.0))),
        im: RealTensor::from_fn(shape, |_| T::lit(rng.random_range(-1.0..1.0))),
    }
}

pub fn small_config(blocks: usize, layers: usize, channels: usize, alpha: f64, coils: usize) -> CascadeConfig {
    CascadeConfig {
        num_blocks: blocks,
        block: BlockConfig {
            num_layers: layers,
            channels,
            alpha,
            kernel_size: 3,
            dense: true,
        },
        coils,
    }
}
