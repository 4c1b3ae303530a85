//! Branch-free elementwise kernels for the transport hot loops.
//!
//! `f64::exp` lowers to a scalar libm call; this version is straight-line
//! arithmetic the compiler can vectorize. It agrees with `f64::exp` to a few
//! ulp on `[-708, 709]`, returns 0 below and saturates above.
//!
//! [`wide_dispatch!`] compiles a kernel twice, once for the baseline target
//! and once with AVX2 enabled, and picks at run time. Floating-point
//! contraction is never enabled, so both copies produce identical bits.

/// Defines `fn $name(args) -> ret` that forwards to the `#[inline(always)]`
/// body `$body`, using an AVX2 build of it when the CPU supports one.
macro_rules! wide_dispatch {
    ($(#[$meta:meta])* $vis:vis fn $name:ident => $body:ident ( $($arg:ident : $ty:ty),* $(,)? ) -> $ret:ty) => {
        $(#[$meta])*
        $vis fn $name($($arg: $ty),*) -> $ret {
            #[cfg(target_arch = "x86_64")]
            {
                #[target_feature(enable = "avx2")]
                #[allow(clippy::too_many_arguments)]
                unsafe fn wide($($arg: $ty),*) -> $ret {
                    $body($($arg),*)
                }
                if std::arch::is_x86_feature_detected!("avx2") {
                    // SAFETY: the required CPU feature was detected above.
                    return unsafe { wide($($arg),*) };
                }
            }
            $body($($arg),*)
        }
    };
}
pub(crate) use wide_dispatch;

const LOG2_E: f64 = std::f64::consts::LOG2_E;
const LN2_HI: f64 = 6.931_471_803_691_238e-1;
const LN2_LO: f64 = 1.908_214_929_270_587_7e-10;
/// `1.5 * 2^52`: adding it rounds to an integer held in the low mantissa bits.
const ROUND_MAGIC: f64 = 6_755_399_441_055_744.0;
const LOWER: f64 = -708.0;
const UPPER: f64 = 709.0;

#[inline(always)]
pub(crate) fn exp(x: f64) -> f64 {
    let xc = if x < LOWER { LOWER } else { x };
    let xc = if xc > UPPER { UPPER } else { xc };
    let kf = xc * LOG2_E + ROUND_MAGIC;
    let kbits = kf.to_bits();
    let kf = kf - ROUND_MAGIC;
    let r = xc - kf * LN2_HI - kf * LN2_LO;
    // Taylor polynomial to degree 12 on |r| <= ln2 / 2.
    let mut p = 1.0 / 479_001_600.0;
    p = p * r + 1.0 / 39_916_800.0;
    p = p * r + 1.0 / 3_628_800.0;
    p = p * r + 1.0 / 362_880.0;
    p = p * r + 1.0 / 40_320.0;
    p = p * r + 1.0 / 5_040.0;
    p = p * r + 1.0 / 720.0;
    p = p * r + 1.0 / 120.0;
    p = p * r + 1.0 / 24.0;
    p = p * r + 1.0 / 6.0;
    p = p * r + 0.5;
    p = p * r + 1.0;
    p = p * r + 1.0;
    // The low mantissa bits of `kbits` hold `k + 2^51`; shifting by 52 keeps
    // `k` modulo 2^12, which adds `k` to the exponent field of `p`.
    let e = f64::from_bits(p.to_bits().wrapping_add(kbits << 52));
    if x < LOWER {
        0.0
    } else {
        e
    }
}

/// Sum with four interleaved accumulators, in a fixed order.
#[inline]
pub(crate) fn sum(v: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let chunks = v.chunks_exact(4);
    let tail = chunks.remainder();
    for c in chunks {
        acc[0] += c[0];
        acc[1] += c[1];
        acc[2] += c[2];
        acc[3] += c[3];
    }
    let mut total = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for &x in tail {
        total += x;
    }
    total
}
