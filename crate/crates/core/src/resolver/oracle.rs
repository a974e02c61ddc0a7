//! Deterministic stand-ins for the language models.

use std::collections::BTreeMap;

use super::prompt::normalize_label;

/// Interaction pairs from the published results table.
pub const TABLE_ONE: [(&str, &str, &str); 8] = [
    ("salmon", "knife", "sushi"),
    ("fried egg", "time", "rotten egg"),
    ("fire", "ice", "water"),
    ("family", "time", "memory"),
    ("memory", "disaster", "ptsd"),
    ("pineapple", "banana", "smoothie"),
    ("apple", "tennis racket", "apple pie"),
    ("dinner", "trash can", "maggot"),
];

/// Worked examples of the collision context, followed by its open query.
pub const CONTEXT_PAIRS: [(&str, &str, &str); 15] = [
    ("loaf of bread", "cheese", "sandwich"),
    ("pen", "paper", "notebook"),
    ("meat", "clock", "bacteria"),
    ("music note", "cube", "instrument"),
    ("water", "air", "ice"),
    ("tree", "clock", "dead tree"),
    ("egg", "clock", "chicken"),
    ("cube", "wheel", "car"),
    ("egg", "frying pan", "fried egg"),
    ("balloon", "pin", "popped balloon"),
    ("bread", "clock", "moldy bread"),
    ("caterpillar", "clock", "butterfly"),
    ("water", "fire", "steam"),
    ("seed", "water", "plant"),
    ("egg", "clock", "chicken"),
];

/// Rule table for collisions. Lookups try `(ball, paddle)`, then the swapped
/// pair, then fall back to `"{ball}-{paddle} fusion"`.
#[derive(Debug, Clone)]
pub struct MockOracle {
    rules: BTreeMap<(String, String), String>,
}

impl Default for MockOracle {
    fn default() -> Self {
        let mut rules = BTreeMap::new();
        for (a, b, out) in CONTEXT_PAIRS.iter().chain(TABLE_ONE.iter()) {
            rules.insert((a.to_string(), b.to_string()), out.to_string());
        }
        Self { rules }
    }
}

impl MockOracle {
    pub fn with_rule(mut self, ball: &str, paddle: &str, output: &str) -> Self {
        self.rules.insert(
            (key(ball), key(paddle)),
            normalize_label(output).unwrap_or_else(|| output.to_lowercase()),
        );
        self
    }

    pub fn lookup(&self, ball: &str, paddle: &str) -> Option<&str> {
        let (a, b) = (key(ball), key(paddle));
        self.rules
            .get(&(a.clone(), b.clone()))
            .or_else(|| self.rules.get(&(b, a)))
            .map(String::as_str)
    }

    pub fn resolve(&self, ball: &str, paddle: &str) -> String {
        self.lookup(ball, paddle)
            .map(str::to_owned)
            .unwrap_or_else(|| format!("{}-{} fusion", key(ball), key(paddle)))
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }
}

fn key(label: &str) -> String {
    normalize_label(label).unwrap_or_default()
}

/// One prebuilt scene of the mock code generator.
pub struct SceneTemplate {
    pub keywords: &'static [&'static str],
    pub title: &'static str,
    pub steps: &'static [&'static str],
    pub program: &'static str,
}

pub const SCENE_LEXICON: [SceneTemplate; 5] = [
    SceneTemplate {
        keywords: &["bedroom"],
        title: "a bedroom",
        steps: &[
            "Remove every object currently in the room.",
            "Load a bed, scale it to 2 meters and place it against the north wall.",
            "Load a nightstand, scale it to 0.6 meters and place it to the right of the bed.",
            "Load a lamp, scale it to 0.4 meters and place it on top of the nightstand.",
            "Load a wardrobe, scale it to 2 meters and place it against the west wall.",
            "Load a rug, scale it to 2.5 meters and lay it in the middle of the floor.",
        ],
        program: "destroy_all\n\
load \"Bed\" as bed\nscale bed 2\nplace bed next_to north_wall (0, 0, -0.5)\n\
load \"Nightstand\" as nightstand\nscale nightstand 0.6\nplace nightstand next_to bed (1, 0, 0)\n\
load \"Lamp\" as lamp\nscale lamp 0.4\nplace lamp next_to nightstand (0, 1, 0)\n\
load \"Wardrobe\" as wardrobe\nscale wardrobe 2\nplace wardrobe next_to west_wall (0.5, 0, 0)\n\
load \"Rug\" as rug\nscale rug 2.5\nmove rug to (0, 0.01, 0)\n",
    },
    SceneTemplate {
        keywords: &["kitchen"],
        title: "a kitchen",
        steps: &[
            "Remove every object currently in the room.",
            "Load a fridge, scale it to 1.8 meters and place it against the north wall.",
            "Load a stove, scale it to 0.9 meters and place it to the left of the fridge.",
            "Load a sink, scale it to 0.9 meters and place it to the left of the stove.",
            "Load a frying pan, scale it to 0.3 meters, put it on the stove and give it a mass of 1.2 kg.",
        ],
        program: "destroy_all\n\
load \"Fridge\" as fridge\nscale fridge 1.8\nplace fridge next_to north_wall (0, 0, -0.5)\n\
load \"Stove\" as stove\nscale stove 0.9\nplace stove next_to fridge (-1, 0, 0)\n\
load \"Sink\" as sink\nscale sink 0.9\nplace sink next_to stove (-1, 0, 0)\n\
load \"Frying Pan\" as pan\nscale pan 0.3\nplace pan next_to stove (0, 1, 0)\nphysics pan 1.2\n",
    },
    SceneTemplate {
        keywords: &["office", "study"],
        title: "an office",
        steps: &[
            "Remove every object currently in the room.",
            "Load a computer desk, scale it to 1.77 meters, give it a mass of 30 kg and place it in front of the north wall.",
            "Load a monitor, scale it to 0.6 meters and place it on the desk.",
            "Load an office chair, scale it to 1.1 meters and place it in front of the desk.",
            "Load a bookshelf, scale it to 2 meters and place it against the east wall.",
        ],
        program: "destroy_all\n\
load \"Computer Desk\" as desk\nscale desk 1.77\nphysics desk 30\nplace desk next_to north_wall (0, 0, -0.5)\n\
load \"Monitor\" as monitor\nscale monitor 0.6\nplace monitor next_to desk (0, 1, 0)\n\
load \"Office Chair\" as chair\nscale chair 1.1\nplace chair next_to desk (0, 0, -1)\n\
load \"Bookshelf\" as bookshelf\nscale bookshelf 2\nplace bookshelf next_to east_wall (-0.5, 0, 0)\n",
    },
    SceneTemplate {
        keywords: &["jungle", "forest", "rainforest"],
        title: "a jungle",
        steps: &[
            "Remove every object currently in the room.",
            "Load a palm tree, scale it to 4 meters and place it against the north wall.",
            "Load a second palm tree, scale it to 3.5 meters and place it against the west wall.",
            "Load a fern, scale it to 1 meter and place it next to the first palm tree.",
            "Load a parrot, scale it to 0.4 meters and place it on top of the fern.",
            "Load a monkey, scale it to 0.8 meters and place it in the middle of the room.",
        ],
        program: "destroy_all\n\
load \"Palm Tree\" as palm\nscale palm 4\nplace palm next_to north_wall (0, 0, -0.5)\n\
load \"Palm Tree\" as palm\nscale palm 3.5\nplace palm next_to west_wall (0.5, 0, 0)\n\
load \"Fern\" as fern\nscale fern 1\nmove fern to (2, 0.5, 2)\n\
load \"Parrot\" as parrot\nscale parrot 0.4\nplace parrot next_to fern (0, 1, 0)\n\
load \"Monkey\" as monkey\nscale monkey 0.8\nmove monkey to (0, 0.4, 0)\n",
    },
    SceneTemplate {
        keywords: &["desk and a flashlight", "desk and flashlight", "flashlight on"],
        title: "a computer desk with a flashlight on top",
        steps: &[
            "Load a computer desk, scale it to 1.77 meters, give it a mass of 30 kg and place it in front of the north wall.",
            "Load a flashlight, scale it to 0.2 meters, place it on top of the desk and give it a mass of 0.25 kg.",
        ],
        program: "load \"Computer Desk\" as desk\nscale desk 1.77\nphysics desk 30\nplace desk next_to north_wall (0, 0, -0.5)\n\
load \"Flashlight\" as flashlight\nscale flashlight 0.2\nplace flashlight next_to desk (0, 1, 0)\nphysics flashlight 0.25\n",
    },
];

pub fn find_scene(text: &str) -> Option<&'static SceneTemplate> {
    let lower = text.to_lowercase();
    SCENE_LEXICON.iter().find(|s| s.keywords.iter().any(|k| lower.contains(k)))
}

/// Template expansion used as the mock elaboration.
pub fn mock_elaboration(request: &str) -> String {
    let request = request.trim();
    match find_scene(request) {
        Some(scene) => {
            let mut out = format!("To build {}:", scene.title);
            for (i, step) in scene.steps.iter().enumerate() {
                out.push_str(&format!("\nStep {}: {step}", i + 1));
            }
            out
        }
        None => format!(
            "To build {request}:\nStep 1: Load a model of {request} and scale it to 1 meter.\nStep 2: Place it on the floor in the middle of the room."
        ),
    }
}

fn hand_joint(lower: &str) -> Option<&'static str> {
    let left = lower.contains("left");
    let joint = if lower.contains("wrist") {
        "Wrist"
    } else if lower.contains("palm") || lower.contains("hand") {
        "Palm"
    } else {
        return None;
    };
    Some(match (left, joint) {
        (false, "Wrist") => "R_Wrist",
        (false, _) => "R_Palm",
        (true, "Wrist") => "L_Wrist",
        (true, _) => "L_Palm",
    })
}

fn object_phrase(instruction: &str) -> String {
    let lower = instruction.to_lowercase();
    let mut s = lower.as_str();
    for lead in [
        "add a model of ",
        "add model of ",
        "add an ",
        "add a ",
        "add the ",
        "add ",
        "put an ",
        "put a ",
        "put ",
        "spawn an ",
        "spawn a ",
        "spawn ",
        "create an ",
        "create a ",
        "create ",
    ] {
        if let Some(rest) = s.strip_prefix(lead) {
            s = rest;
            break;
        }
    }
    for stop in [
        " model", " to the", " to my", " on the", " on my", " in the", " in my", " into ", " next to", " onto", " to ",
    ] {
        if let Some(i) = s.find(stop) {
            s = &s[..i];
        }
    }
    let cleaned: String = s
        .chars()
        .filter(|c| c.is_alphanumeric() || c.is_whitespace() || *c == '-')
        .collect();
    cleaned.split_whitespace().take(5).collect::<Vec<_>>().join(" ")
}

fn binding_for(phrase: &str) -> String {
    let mut b: String = phrase
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() {
                c.to_ascii_lowercase()
            } else {
                '_'
            }
        })
        .collect();
    if b.is_empty() || b.starts_with(|c: char| c.is_ascii_digit()) {
        b.insert(0, 'm');
    }
    b.truncate(32);
    b
}

/// Deterministic program for a natural-language instruction.
pub fn mock_program(instruction: &str) -> String {
    if let Some(scene) = find_scene(instruction) {
        return scene.program.to_owned();
    }
    let lower = instruction.to_lowercase();
    if [
        "clear the room",
        "remove everything",
        "empty the room",
        "destroy everything",
        "delete everything",
    ]
    .iter()
    .any(|k| lower.contains(k))
    {
        return "destroy_all\n".into();
    }
    let phrase = object_phrase(instruction);
    if phrase.is_empty() {
        return "destroy_all\n".into();
    }
    let name = binding_for(&phrase);
    match hand_joint(&lower) {
        Some(joint) => format!("load \"{phrase}\" as {name}\nscale {name} 0.3\nattach {name} to {joint}\n"),
        None => format!("load \"{phrase}\" as {name}\nscale {name} 1\nplace {name} next_to floor (0, 1, 0)\n"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_rows() {
        let o = MockOracle::default();
        for (a, b, out) in TABLE_ONE.iter().chain(CONTEXT_PAIRS.iter()) {
            assert_eq!(o.resolve(a, b), *out);
        }
    }

    #[test]
    fn fallback_is_total() {
        let o = MockOracle::default();
        assert_eq!(o.resolve("Sushi", "knife"), "sushi-knife fusion");
        assert_eq!(o.resolve("sushi", "knife"), o.resolve("sushi", "knife"));
        // reversed pair still hits the table
        assert_eq!(o.resolve("knife", "salmon"), "sushi");
    }

    #[test]
    fn elaboration_mentions_objects() {
        let e = mock_elaboration("a bedroom");
        assert!(e.contains("Step 1:") && e.contains("Step 2:"));
        assert!(e.contains("bed") && e.contains("lamp") && e.contains("place"));
    }

    #[test]
    fn hand_tool_program() {
        assert_eq!(
            mock_program("Add a Medical Saw model to the right leap motion wrist"),
            "load \"medical saw\" as medical_saw\nscale medical_saw 0.3\nattach medical_saw to R_Wrist\n"
        );
        assert!(mock_program("Change the scene into a bedroom").starts_with("destroy_all\nload \"Bed\""));
        assert_eq!(
            mock_program("put a flashlight in my right hand"),
            "load \"flashlight\" as flashlight\nscale flashlight 0.3\nattach flashlight to R_Palm\n"
        );
    }
}
