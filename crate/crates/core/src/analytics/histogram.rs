use std::collections::BTreeMap;

/// Counts bucketed by powers of two: value `v` lands in bucket
/// `floor(log2(max(v, 1)))`, so zero and one share bucket 0.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BucketedHistogram {
    buckets: BTreeMap<i32, u64>,
}

/// Bucket index of an integer observation.
pub fn bucket_of_int(value: i64) -> i32 {
    let v = value.max(1) as u64;
    63 - v.leading_zeros() as i32
}

/// Bucket index of a real observation; exact at powers of two.
pub fn bucket_of_real(value: f64) -> i32 {
    if value.is_nan() || value < 2.0 {
        return 0;
    }
    if value.is_infinite() {
        return 1024;
    }
    // the biased exponent of a normal double is floor(log2(v))
    ((value.to_bits() >> 52) & 0x7ff) as i32 - 1023
}

impl BucketedHistogram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_integers<I: IntoIterator<Item = i64>>(values: I) -> Self {
        let mut h = Self::new();
        for v in values {
            h.add_bucket(bucket_of_int(v), 1);
        }
        h
    }

    pub fn from_reals<I: IntoIterator<Item = f64>>(values: I) -> Self {
        let mut h = Self::new();
        for v in values {
            h.add_bucket(bucket_of_real(v), 1);
        }
        h
    }

    /// Builds a histogram from explicit `(bucket, count)` pairs.
    pub fn from_buckets<I: IntoIterator<Item = (i32, u64)>>(pairs: I) -> Self {
        let mut h = Self::new();
        for (k, c) in pairs {
            h.add_bucket(k, c);
        }
        h
    }

    pub fn add_bucket(&mut self, bucket: i32, count: u64) {
        if count > 0 {
            *self.buckets.entry(bucket).or_insert(0) += count;
        }
    }

    pub fn merge(&mut self, other: &BucketedHistogram) {
        for (&k, &c) in &other.buckets {
            self.add_bucket(k, c);
        }
    }

    pub fn count(&self, bucket: i32) -> u64 {
        self.buckets.get(&bucket).copied().unwrap_or(0)
    }

    /// Number of observations.
    pub fn total(&self) -> u64 {
        self.buckets.values().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.buckets.is_empty()
    }

    /// Occupied buckets in ascending order.
    pub fn iter(&self) -> impl Iterator<Item = (i32, u64)> + '_ {
        self.buckets.iter().map(|(&k, &c)| (k, c))
    }

    pub fn to_vec(&self) -> Vec<(i32, u64)> {
        self.iter().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integer_buckets() {
        assert_eq!(bucket_of_int(-5), 0);
        assert_eq!(bucket_of_int(0), 0);
        assert_eq!(bucket_of_int(1), 0);
        assert_eq!(bucket_of_int(2), 1);
        assert_eq!(bucket_of_int(3), 1);
        assert_eq!(bucket_of_int(9), 3);
        assert_eq!(bucket_of_int(1 << 40), 40);
        assert_eq!(bucket_of_int((1 << 40) - 1), 39);
    }

    #[test]
    fn real_buckets_agree_with_integers() {
        for v in [0i64, 1, 2, 3, 4, 7, 8, 1000, 1 << 30, (1 << 30) + 1] {
            assert_eq!(bucket_of_real(v as f64), bucket_of_int(v), "{v}");
        }
        assert_eq!(bucket_of_real(1.999999), 0);
        assert_eq!(bucket_of_real(2.0), 1);
        assert_eq!(bucket_of_real(0.3), 0);
        assert_eq!(bucket_of_real(f64::NAN), 0);
    }

    #[test]
    fn totals_and_merge() {
        let mut h = BucketedHistogram::from_integers([1, 2, 3, 4]);
        assert_eq!(h.to_vec(), [(0, 1), (1, 2), (2, 1)]);
        assert_eq!(h.total(), 4);
        h.merge(&BucketedHistogram::from_buckets([(2, 3), (5, 0)]));
        assert_eq!(h.count(2), 4);
        assert_eq!(h.count(5), 0);
        assert!(BucketedHistogram::from_integers(Vec::new()).is_empty());
    }
}
