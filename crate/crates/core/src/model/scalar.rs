use std::fmt::{Debug, Display};
use std::io::{self, Read};

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};
use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Real scalar the model and losses are generic over.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + NumAssign + Default + Debug + Display + Send + Sync + 'static
{
    /// Bytes per value in checkpoint files.
    const WIDTH: u8;

    fn write_le(self, out: &mut Vec<u8>);
    fn read_le<R: Read>(r: &mut R) -> io::Result<Self>;
    fn bits(self) -> u64;

    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("representable literal")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite conversion")
    }
}

impl Scalar for f32 {
    const WIDTH: u8 = 4;

    fn write_le(self, out: &mut Vec<u8>) {
        out.write_f32::<LE>(self).unwrap();
    }

    fn read_le<R: Read>(r: &mut R) -> io::Result<Self> {
        r.read_f32::<LE>()
    }

    fn bits(self) -> u64 {
        u64::from(self.to_bits())
    }
}

impl Scalar for f64 {
    const WIDTH: u8 = 8;

    fn write_le(self, out: &mut Vec<u8>) {
        out.write_f64::<LE>(self).unwrap();
    }

    fn read_le<R: Read>(r: &mut R) -> io::Result<Self> {
        r.read_f64::<LE>()
    }

    fn bits(self) -> u64 {
        self.to_bits()
    }
}

pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// `acc += scale * x`
pub fn axpy<T: Scalar>(acc: &mut [T], scale: T, x: &[T]) {
    for (a, &v) in acc.iter_mut().zip(x) {
        *a += scale * v;
    }
}
