//! Network topology and its text format.
//!
//! ```text
//! [network]
//! name = toy
//! input = 3x8x8
//! classes = 4
//!
//! [layer.conv1]
//! kind = host_conv
//! k = 3
//! out = 16
//! stride = 1
//! padding = 1
//! ```
//!
//! `input` is channels x height x width. `kind` is one of `conv`, `fc`,
//! `pool`, `host_conv` and `host_fc`. Layers run in file order. `in` may be
//! given and is then checked against the composed shape. Binarized layers
//! accept `thresholds = t0, t1, ...` (one per output channel) overriding the
//! half-kernel rule.

use std::fmt;
use std::str::FromStr;

use ini::Ini;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Shape {
    pub channels: u32,
    pub height: u32,
    pub width: u32,
}

impl Shape {
    pub fn new(channels: u32, height: u32, width: u32) -> Self {
        Self {
            channels,
            height,
            width,
        }
    }

    pub fn len(&self) -> usize {
        self.channels as usize * self.height as usize * self.width as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn positions(&self) -> usize {
        self.height as usize * self.width as usize
    }

    /// Flat index of `(c, y, x)`; positions are major, channels innermost.
    pub fn index(&self, c: u32, y: u32, x: u32) -> usize {
        (y as usize * self.width as usize + x as usize) * self.channels as usize + c as usize
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.channels, self.height, self.width)
    }
}

impl FromStr for Shape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<u32> = s
            .split('x')
            .map(|p| p.trim().parse::<u32>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Network(format!("bad shape '{s}', want CxHxW")))?;
        match parts[..] {
            [c, h, w] if c > 0 && h > 0 && w > 0 => Ok(Shape::new(c, h, w)),
            _ => Err(Error::Network(format!("bad shape '{s}', want CxHxW"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LayerKind {
    Conv,
    Fc,
    Pool,
    HostConv,
    HostFc,
}

impl LayerKind {
    pub fn name(&self) -> &'static str {
        match self {
            LayerKind::Conv => "conv",
            LayerKind::Fc => "fc",
            LayerKind::Pool => "pool",
            LayerKind::HostConv => "host_conv",
            LayerKind::HostFc => "host_fc",
        }
    }

    pub fn binarized(&self) -> bool {
        matches!(self, LayerKind::Conv | LayerKind::Fc)
    }

    pub fn has_weights(&self) -> bool {
        !matches!(self, LayerKind::Pool)
    }

    fn is_fc(&self) -> bool {
        matches!(self, LayerKind::Fc | LayerKind::HostFc)
    }
}

impl FromStr for LayerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "conv" => LayerKind::Conv,
            "fc" => LayerKind::Fc,
            "pool" => LayerKind::Pool,
            "host_conv" => LayerKind::HostConv,
            "host_fc" => LayerKind::HostFc,
            _ => return Err(Error::Network(format!("unknown layer kind '{s}'"))),
        })
    }
}

/// One layer. For fully connected layers `k = 1` and `in_channels` is the
/// flattened input length; for pooling `k = stride = 2`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerSpec {
    pub name: String,
    pub kind: LayerKind,
    pub k: u32,
    pub in_channels: u32,
    pub out_channels: u32,
    pub stride: u32,
    pub padding: u32,
    pub thresholds: Option<Vec<i64>>,
}

impl LayerSpec {
    pub fn conv(name: &str, k: u32, in_channels: u32, out_channels: u32) -> Self {
        Self {
            name: name.into(),
            kind: LayerKind::Conv,
            k,
            in_channels,
            out_channels,
            stride: 1,
            padding: 0,
            thresholds: None,
        }
    }

    pub fn fc(name: &str, inputs: u32, outputs: u32) -> Self {
        Self {
            kind: LayerKind::Fc,
            ..Self::conv(name, 1, inputs, outputs)
        }
    }

    pub fn pool(name: &str, channels: u32) -> Self {
        Self {
            kind: LayerKind::Pool,
            stride: 2,
            ..Self::conv(name, 2, channels, channels)
        }
    }

    pub fn with_kind(mut self, kind: LayerKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn with_padding(mut self, padding: u32) -> Self {
        self.padding = padding;
        self
    }

    pub fn with_stride(mut self, stride: u32) -> Self {
        self.stride = stride;
        self
    }

    pub fn binarized(&self) -> bool {
        self.kind.binarized()
    }

    /// Bits (or integer terms) per output element: `k * k * I`.
    pub fn kernel_size(&self) -> usize {
        self.k as usize * self.k as usize * self.in_channels as usize
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Network(format!("layer {}: {m}", self.name)));
        if self.k == 0 || self.in_channels == 0 || self.out_channels == 0 {
            return bad("k, in and out must be >= 1".into());
        }
        if self.stride == 0 {
            return bad("stride must be >= 1".into());
        }
        match self.kind {
            LayerKind::Pool => {
                if self.k != 2 || self.stride != 2 || self.padding != 0 {
                    return bad("pooling is fixed at 2x2 stride 2 without padding".into());
                }
                if self.in_channels != self.out_channels {
                    return bad("pooling keeps the channel count".into());
                }
            }
            LayerKind::Fc | LayerKind::HostFc
                if self.k != 1 || self.stride != 1 || self.padding != 0 =>
            {
                return bad("fully connected layers take no k, stride or padding".into());
            }
            _ => {}
        }
        if let Some(t) = &self.thresholds {
            if !self.binarized() {
                return bad("thresholds apply to binarized layers only".into());
            }
            if t.len() != self.out_channels as usize {
                return bad(format!(
                    "{} thresholds for {} output channels",
                    t.len(),
                    self.out_channels
                ));
            }
        }
        Ok(())
    }

    /// Output shape for `input`, checking that the shapes compose.
    pub fn output_shape(&self, input: Shape) -> Result<Shape> {
        let bad = |m: String| Err(Error::Shape(format!("layer {}: {m}", self.name)));
        match self.kind {
            LayerKind::Fc | LayerKind::HostFc => {
                if input.len() != self.in_channels as usize {
                    return bad(format!("expects {} inputs, got {input}", self.in_channels));
                }
                Ok(Shape::new(self.out_channels, 1, 1))
            }
            LayerKind::Pool => {
                if input.channels != self.in_channels {
                    return bad(format!(
                        "expects {} channels, got {input}",
                        self.in_channels
                    ));
                }
                if !input.height.is_multiple_of(2) || !input.width.is_multiple_of(2) {
                    return bad(format!("pooling needs even spatial dims, got {input}"));
                }
                Ok(Shape::new(
                    input.channels,
                    input.height / 2,
                    input.width / 2,
                ))
            }
            LayerKind::Conv | LayerKind::HostConv => {
                if input.channels != self.in_channels {
                    return bad(format!(
                        "expects {} channels, got {input}",
                        self.in_channels
                    ));
                }
                let out = |d: u32| {
                    let padded = d + 2 * self.padding;
                    (padded >= self.k).then(|| (padded - self.k) / self.stride + 1)
                };
                match (out(input.height), out(input.width)) {
                    (Some(h), Some(w)) => Ok(Shape::new(self.out_channels, h, w)),
                    _ => bad(format!(
                        "{k}x{k} kernel larger than padded {input}",
                        k = self.k
                    )),
                }
            }
        }
    }

    /// Output positions for `input` (1 for fully connected layers).
    pub fn positions(&self, input: Shape) -> Result<usize> {
        Ok(self.output_shape(input)?.positions())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkSpec {
    pub name: String,
    pub input: Shape,
    pub classes: u32,
    pub layers: Vec<LayerSpec>,
}

impl NetworkSpec {
    /// Checks every layer and that shapes compose down to `classes` outputs.
    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::Network("network has no layers".into()));
        }
        if self.classes == 0 {
            return Err(Error::Network("classes must be >= 1".into()));
        }
        let mut names = std::collections::HashSet::new();
        for l in &self.layers {
            if !names.insert(l.name.as_str()) {
                return Err(Error::Network(format!("duplicate layer name {}", l.name)));
            }
            l.validate()?;
        }
        let out = self.output_shape()?;
        if out.len() != self.classes as usize {
            return Err(Error::Shape(format!(
                "network ends in {out} outputs but declares {} classes",
                self.classes
            )));
        }
        Ok(())
    }

    /// Input shape of every layer followed by the final output shape.
    pub fn shapes(&self) -> Result<Vec<Shape>> {
        let mut shapes = vec![self.input];
        for l in &self.layers {
            let next = l.output_shape(*shapes.last().unwrap())?;
            shapes.push(next);
        }
        Ok(shapes)
    }

    pub fn output_shape(&self) -> Result<Shape> {
        Ok(*self.shapes()?.last().unwrap())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let ini = Ini::load_from_str(text).map_err(|e| Error::Network(e.to_string()))?;
        let mut header = None;
        let mut raw_layers = Vec::new();
        for (section, props) in ini.iter() {
            match section {
                None => {
                    if let Some((k, _)) = props.iter().next() {
                        return Err(Error::Network(format!("key '{k}' outside any section")));
                    }
                }
                Some("network") => {
                    if header.replace(props).is_some() {
                        return Err(Error::Network("duplicate [network] section".into()));
                    }
                }
                Some(s) => match s.strip_prefix("layer.") {
                    Some(name) if !name.is_empty() => raw_layers.push((name, props)),
                    _ => return Err(Error::Network(format!("unknown section [{s}]"))),
                },
            }
        }
        let header = header.ok_or_else(|| Error::Network("missing [network] section".into()))?;
        check_keys("network", header, &["name", "input", "classes"])?;
        let input: Shape = required(header, "network", "input")?.parse()?;
        let classes = parse_num(required(header, "network", "classes")?, "classes")?;
        let name = header.get("name").unwrap_or("network").to_string();

        let mut layers = Vec::new();
        let mut shape = input;
        for (lname, props) in raw_layers {
            let layer = parse_layer(lname, props, shape)?;
            layer.validate()?;
            shape = layer.output_shape(shape)?;
            layers.push(layer);
        }
        let spec = NetworkSpec {
            name,
            input,
            classes,
            layers,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| Error::Network(format!("{}: {e}", path.display())))
    }

    /// Text form accepted by [`NetworkSpec::parse`].
    pub fn to_text(&self) -> String {
        let mut s = format!(
            "[network]\nname = {}\ninput = {}\nclasses = {}\n",
            self.name, self.input, self.classes
        );
        for l in &self.layers {
            s += &format!("\n[layer.{}]\nkind = {}\n", l.name, l.kind.name());
            match l.kind {
                LayerKind::Pool => {}
                LayerKind::Fc | LayerKind::HostFc => {
                    s += &format!("in = {}\nout = {}\n", l.in_channels, l.out_channels)
                }
                LayerKind::Conv | LayerKind::HostConv => {
                    s += &format!(
                        "k = {}\nin = {}\nout = {}\nstride = {}\npadding = {}\n",
                        l.k, l.in_channels, l.out_channels, l.stride, l.padding
                    )
                }
            }
            if let Some(t) = &l.thresholds {
                let t: Vec<String> = t.iter().map(|v| v.to_string()).collect();
                s += &format!("thresholds = {}\n", t.join(", "));
            }
        }
        s
    }
}

fn check_keys(section: &str, props: &ini::Properties, allowed: &[&str]) -> Result<()> {
    for (k, _) in props.iter() {
        if !allowed.contains(&k) {
            return Err(Error::Network(format!("[{section}]: unknown key '{k}'")));
        }
    }
    Ok(())
}

fn required<'a>(props: &'a ini::Properties, section: &str, key: &str) -> Result<&'a str> {
    props
        .get(key)
        .ok_or_else(|| Error::Network(format!("[{section}]: missing '{key}'")))
}

fn parse_num<T: FromStr>(v: &str, key: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| Error::Network(format!("bad value '{v}' for '{key}'")))
}

fn parse_layer(name: &str, props: &ini::Properties, input: Shape) -> Result<LayerSpec> {
    let section = format!("layer.{name}");
    let kind: LayerKind = required(props, &section, "kind")?.parse()?;
    let opt = |key: &str| -> Result<Option<u32>> {
        props.get(key).map(|v| parse_num(v, key)).transpose()
    };
    let allowed: &[&str] = match kind {
        LayerKind::Pool => &["kind", "in", "out"],
        LayerKind::Fc => &["kind", "in", "out", "thresholds"],
        LayerKind::HostFc => &["kind", "in", "out"],
        LayerKind::Conv => &["kind", "k", "in", "out", "stride", "padding", "thresholds"],
        LayerKind::HostConv => &["kind", "k", "in", "out", "stride", "padding"],
    };
    check_keys(&section, props, allowed)?;
    let composed_in = if kind.is_fc() {
        input.len() as u32
    } else {
        input.channels
    };
    if let Some(i) = opt("in")? {
        if i != composed_in {
            return Err(Error::Shape(format!(
                "layer {name}: declares in = {i} but receives {composed_in}"
            )));
        }
    }
    let mut layer = match kind {
        LayerKind::Pool => {
            if let Some(o) = opt("out")? {
                if o != input.channels {
                    return Err(Error::Network(format!(
                        "layer {name}: pooling keeps channels"
                    )));
                }
            }
            LayerSpec::pool(name, input.channels)
        }
        LayerKind::Fc | LayerKind::HostFc => {
            let out = parse_num(required(props, &section, "out")?, "out")?;
            LayerSpec::fc(name, composed_in, out).with_kind(kind)
        }
        LayerKind::Conv | LayerKind::HostConv => {
            let k = parse_num(required(props, &section, "k")?, "k")?;
            let out = parse_num(required(props, &section, "out")?, "out")?;
            LayerSpec::conv(name, k, composed_in, out)
                .with_kind(kind)
                .with_stride(opt("stride")?.unwrap_or(1))
                .with_padding(opt("padding")?.unwrap_or(0))
        }
    };
    if let Some(t) = props.get("thresholds") {
        layer.thresholds = Some(
            t.split(',')
                .map(|v| parse_num::<i64>(v, "thresholds"))
                .collect::<Result<_>>()?,
        );
    }
    Ok(layer)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOY: &str = "
[network]
name = toy
input = 2x8x8
classes = 3

[layer.c1]
kind = host_conv
k = 3
out = 8
padding = 1

[layer.c2]
kind = conv
k = 3
in = 8
out = 16
padding = 1

[layer.p1]
kind = pool

[layer.f1]
kind = fc
out = 32
thresholds = 16, 16, 16, 16, 16, 16, 16, 16, 16, 16, 16, 16, 16, 16, 16, 16, 16, 16, 16, 16, 16, 16, 16, 16, 16, 16, 16, 16, 16, 16, 16, 16

[layer.f2]
kind = host_fc
out = 3
";

    #[test]
    fn parses_in_order_and_composes() {
        let net = NetworkSpec::parse(TOY).unwrap();
        assert_eq!(net.name, "toy");
        let names: Vec<_> = net.layers.iter().map(|l| l.name.as_str()).collect();
        assert_eq!(names, ["c1", "c2", "p1", "f1", "f2"]);
        let shapes = net.shapes().unwrap();
        assert_eq!(shapes[1], Shape::new(8, 8, 8));
        assert_eq!(shapes[3], Shape::new(16, 4, 4));
        assert_eq!(net.layers[3].in_channels, 256);
        assert_eq!(net.layers[3].kernel_size(), 256);
        assert_eq!(net.layers[1].kernel_size(), 72);
        assert_eq!(shapes[5], Shape::new(3, 1, 1));
    }

    #[test]
    fn text_round_trips() {
        let net = NetworkSpec::parse(TOY).unwrap();
        assert_eq!(NetworkSpec::parse(&net.to_text()).unwrap(), net);
    }

    #[test]
    fn rejects_malformed_networks() {
        let bad_in = TOY.replace("in = 8\n", "in = 9\n");
        assert!(NetworkSpec::parse(&bad_in).is_err());
        let bad_classes = TOY.replace("classes = 3", "classes = 4");
        assert!(NetworkSpec::parse(&bad_classes).is_err());
        let bad_kind = TOY.replace("kind = pool", "kind = avgpool");
        assert!(NetworkSpec::parse(&bad_kind).is_err());
        let bad_key = TOY.replace("kind = pool", "kind = pool\nk = 3");
        assert!(NetworkSpec::parse(&bad_key).is_err());
        let odd = TOY.replace("k = 3\nin = 8", "k = 4\nin = 8");
        assert!(NetworkSpec::parse(&odd).is_err());
        assert!(NetworkSpec::parse("[layer.a]\nkind = fc\nout = 2\n").is_err());
    }

    #[test]
    fn conv_output_shape() {
        let l = LayerSpec::conv("c", 3, 4, 5).with_stride(2).with_padding(1);
        assert_eq!(
            l.output_shape(Shape::new(4, 8, 8)).unwrap(),
            Shape::new(5, 4, 4)
        );
        assert!(LayerSpec::conv("c", 5, 4, 5)
            .output_shape(Shape::new(4, 3, 3))
            .is_err());
        assert!(LayerSpec::conv("c", 1, 4, 5)
            .output_shape(Shape::new(3, 3, 3))
            .is_err());
    }
}
