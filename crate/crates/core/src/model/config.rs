use crate::error::{Error, Result};

/// Architecture hyper-parameters of the generator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelConfig {
    pub n_z: usize,
    /// Template elements per complexity level.
    pub n_pi: usize,
    pub top_k: usize,
    pub level_dim: usize,
    pub expert_dim: usize,
    pub template_dim: usize,
    /// Decoder state size; each encoder direction gets half.
    pub hidden: usize,
    pub word_dim: usize,
    pub max_decode_len: usize,
    pub use_moe: bool,
    pub use_templates: bool,
    pub length_normalize: bool,
    /// Seeds parameter initialisation.
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            n_z: 3,
            n_pi: 12,
            top_k: 4,
            level_dim: 30,
            expert_dim: 50,
            template_dim: 50,
            hidden: 256,
            word_dim: 128,
            max_decode_len: 30,
            use_moe: true,
            use_templates: true,
            length_normalize: false,
            seed: 7,
        }
    }
}

pub(crate) fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.trim().parse().map_err(|_| Error::Config(format!("`{key}` has an unparsable value `{value}`")))
}

impl ModelConfig {
    /// Micro configuration used by gradient checks.
    pub fn micro() -> Self {
        Self {
            n_z: 2,
            n_pi: 3,
            top_k: 2,
            level_dim: 4,
            expert_dim: 4,
            template_dim: 4,
            hidden: 8,
            word_dim: 4,
            max_decode_len: 8,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("n_z", self.n_z),
            ("n_pi", self.n_pi),
            ("level_dim", self.level_dim),
            ("expert_dim", self.expert_dim),
            ("template_dim", self.template_dim),
            ("word_dim", self.word_dim),
            ("max_decode_len", self.max_decode_len),
        ];
        if let Some((name, _)) = dims.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("`{name}` must be at least 1")));
        }
        if self.top_k == 0 || self.top_k > self.n_pi {
            return Err(Error::Config(format!("top_k must lie in 1..={}, got {}", self.n_pi, self.top_k)));
        }
        if self.hidden < 2 || self.hidden % 2 != 0 {
            return Err(Error::Config(format!("hidden must be an even number >= 2, got {}", self.hidden)));
        }
        Ok(())
    }

    pub const KEYS: [&'static str; 13] = [
        "n_z",
        "n_pi",
        "top_k",
        "level_dim",
        "expert_dim",
        "template_dim",
        "hidden",
        "word_dim",
        "max_decode_len",
        "use_moe",
        "use_templates",
        "length_normalize",
        "model_seed",
    ];

    /// Applies one `key = value` entry. Returns `false` for keys this
    /// struct does not own.
    pub fn set(&mut self, key: &str, value: &str) -> Result<bool> {
        match key {
            "n_z" => self.n_z = parse_value(key, value)?,
            "n_pi" => self.n_pi = parse_value(key, value)?,
            "top_k" => self.top_k = parse_value(key, value)?,
            "level_dim" => self.level_dim = parse_value(key, value)?,
            "expert_dim" => self.expert_dim = parse_value(key, value)?,
            "template_dim" => self.template_dim = parse_value(key, value)?,
            "hidden" => self.hidden = parse_value(key, value)?,
            "word_dim" => self.word_dim = parse_value(key, value)?,
            "max_decode_len" => self.max_decode_len = parse_value(key, value)?,
            "use_moe" => self.use_moe = parse_value(key, value)?,
            "use_templates" => self.use_templates = parse_value(key, value)?,
            "length_normalize" => self.length_normalize = parse_value(key, value)?,
            "model_seed" => self.seed = parse_value(key, value)?,
            _ => return Ok(false),
        }
        Ok(true)
    }

    pub fn entries(&self) -> Vec<(&'static str, String)> {
        vec![
            ("n_z", self.n_z.to_string()),
            ("n_pi", self.n_pi.to_string()),
            ("top_k", self.top_k.to_string()),
            ("level_dim", self.level_dim.to_string()),
            ("expert_dim", self.expert_dim.to_string()),
            ("template_dim", self.template_dim.to_string()),
            ("hidden", self.hidden.to_string()),
            ("word_dim", self.word_dim.to_string()),
            ("max_decode_len", self.max_decode_len.to_string()),
            ("use_moe", self.use_moe.to_string()),
            ("use_templates", self.use_templates.to_string()),
            ("length_normalize", self.length_normalize.to_string()),
            ("model_seed", self.seed.to_string()),
        ]
    }
}
