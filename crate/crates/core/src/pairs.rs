use serde::{Deserialize, Serialize};

/// Dense per-(RRH, user) storage, RRH-major.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairMatrix<T> {
    num_rrhs: usize,
    num_users: usize,
    data: Vec<T>,
}

impl<T: Clone> PairMatrix<T> {
    pub fn filled(num_rrhs: usize, num_users: usize, value: T) -> Self {
        PairMatrix {
            num_rrhs,
            num_users,
            data: vec![value; num_rrhs * num_users],
        }
    }
}

impl<T> PairMatrix<T> {
    pub fn from_fn(num_rrhs: usize, num_users: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(num_rrhs * num_users);
        for r in 0..num_rrhs {
            for u in 0..num_users {
                data.push(f(r, u));
            }
        }
        PairMatrix {
            num_rrhs,
            num_users,
            data,
        }
    }

    pub fn num_rrhs(&self) -> usize {
        self.num_rrhs
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    #[inline]
    pub fn get(&self, r: usize, u: usize) -> &T {
        &self.data[r * self.num_users + u]
    }

    #[inline]
    pub fn get_mut(&mut self, r: usize, u: usize) -> &mut T {
        &mut self.data[r * self.num_users + u]
    }

    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.num_users..(r + 1) * self.num_users]
    }

    pub fn iter(&self) -> impl Iterator<Item = &T> {
        self.data.iter()
    }
}

impl<T: Copy> PairMatrix<T> {
    #[inline]
    pub fn at(&self, r: usize, u: usize) -> T {
        self.data[r * self.num_users + u]
    }
}
