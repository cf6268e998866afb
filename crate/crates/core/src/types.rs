use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ClassId(pub u32);

impl ClassId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for ClassId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ImageShape {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

impl ImageShape {
    pub fn new(height: usize, width: usize, channels: usize) -> Self {
        ImageShape {
            height,
            width,
            channels,
        }
    }

    pub fn len(&self) -> usize {
        self.height * self.width * self.channels
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl fmt::Display for ImageShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.height, self.width, self.channels)
    }
}

/// Row-major `(h, w, c)` u8 image.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ImageU8 {
    shape: ImageShape,
    data: Vec<u8>,
}

impl ImageU8 {
    pub fn new(shape: ImageShape, data: Vec<u8>) -> Result<Self> {
        if data.len() != shape.len() {
            return Err(Error::Shape(format!(
                "image {shape} needs {} bytes, got {}",
                shape.len(),
                data.len()
            )));
        }
        Ok(ImageU8 { shape, data })
    }

    pub fn shape(&self) -> ImageShape {
        self.shape
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    #[inline]
    pub fn at(&self, y: usize, x: usize, c: usize) -> u8 {
        self.data[(y * self.shape.width + x) * self.shape.channels + c]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Payload {
    Image(ImageU8),
    Vector(Vec<f32>),
}

impl Payload {
    pub fn image(shape: ImageShape, data: Vec<u8>) -> Result<Self> {
        ImageU8::new(shape, data).map(Payload::Image)
    }

    /// Number of scalar elements (`h·w·c` or the vector dimension).
    pub fn len(&self) -> usize {
        match self {
            Payload::Image(img) => img.data.len(),
            Payload::Vector(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn image_shape(&self) -> Option<ImageShape> {
        match self {
            Payload::Image(img) => Some(img.shape),
            Payload::Vector(_) => None,
        }
    }

    pub fn as_image(&self) -> Option<&ImageU8> {
        match self {
            Payload::Image(img) => Some(img),
            Payload::Vector(_) => None,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Payload::Image(_) => "image_u8",
            Payload::Vector(_) => "vec_f32",
        }
    }
}

/// Exact stored size: one byte per image element, four per vector element.
pub fn payload_bytes(p: &Payload) -> usize {
    match p {
        Payload::Image(img) => img.data.len(),
        Payload::Vector(v) => v.len() * std::mem::size_of::<f32>(),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    id: u64,
    class: ClassId,
    payload: Payload,
    byte_size: usize,
}

impl Instance {
    pub fn new(id: u64, class: ClassId, payload: Payload) -> Result<Self> {
        let byte_size = payload_bytes(&payload);
        if byte_size == 0 {
            return Err(Error::EmptyPayload);
        }
        Ok(Instance {
            id,
            class,
            payload,
            byte_size,
        })
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn class(&self) -> ClassId {
        self.class
    }

    pub fn payload(&self) -> &Payload {
        &self.payload
    }

    pub fn byte_size(&self) -> usize {
        self.byte_size
    }

    /// Same id and class, new payload; byte size is recomputed.
    pub fn with_payload(&self, payload: Payload) -> Result<Self> {
        Instance::new(self.id, self.class, payload)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ByteBudget(usize);

impl ByteBudget {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::ZeroBudget);
        }
        Ok(ByteBudget(capacity))
    }

    pub fn capacity(self) -> usize {
        self.0
    }
}
