//! Compensated reductions. Sums are always taken sequentially in index
//! order so results do not depend on the thread schedule.

use rustfft::num_complex::Complex64;

/// Neumaier summation.
#[derive(Debug, Default, Clone, Copy)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::new();
        for x in iter {
            s.add(x);
        }
        s
    }
}

pub fn sum(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().collect::<CompensatedSum>().value()
}

pub fn norm_sqr(a: &[Complex64]) -> f64 {
    sum(a.iter().map(|z| z.norm_sqr()))
}

pub fn l2(a: &[Complex64]) -> f64 {
    norm_sqr(a).sqrt()
}

pub fn diff_l2(a: &[Complex64], b: &[Complex64]) -> f64 {
    assert_eq!(a.len(), b.len());
    sum(a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr())).sqrt()
}

/// `‖a − b‖ / ‖reference‖`; zero when both vanish.
pub fn relative_l2(a: &[Complex64], b: &[Complex64], reference: &[Complex64]) -> f64 {
    let num = diff_l2(a, b);
    let den = l2(reference);
    if den == 0.0 {
        if num == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        num / den
    }
}

/// Complex inner product `Σ a·conj(b)`, compensated on both components.
pub fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    let mut re = CompensatedSum::new();
    let mut im = CompensatedSum::new();
    for (x, y) in a.iter().zip(b) {
        let p = x * y.conj();
        re.add(p.re);
        im.add(p.im);
    }
    Complex64::new(re.value(), im.value())
}
