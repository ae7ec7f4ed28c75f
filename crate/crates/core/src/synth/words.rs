//! Tweet templates. Background text never touches either lexicon; accident
//! and culture texts each hit only their own lexicon.

use crate::numerics::RngState;

pub const FILLER: &[&str] = &[
    "coffee", "lunch", "dinner", "breakfast", "weather", "sunny", "cloudy", "rainy", "music", "concert",
    "game", "friends", "family", "weekend", "movie", "book", "park", "garden", "beach", "mountain",
    "hiking", "running", "yoga", "pizza", "tacos", "burger", "salad", "soup", "bakery", "market",
    "shopping", "sale", "new", "great", "awesome", "lovely", "beautiful", "tired", "happy", "excited",
    "busy", "quiet", "relaxing", "fun", "amazing", "best", "favorite", "tonight", "today", "tomorrow",
    "evening", "afternoon", "sunset", "sunrise", "view", "photo", "dog", "cat", "puppy", "kitten",
    "birthday", "party", "wedding", "celebration", "team", "win", "season", "tickets", "show", "festival",
    "art", "museum", "gallery", "library", "class", "study", "exam", "project", "work", "meeting",
    "office", "remote", "laptop", "phone", "app", "update", "podcast", "episode", "series", "album",
    "song", "band", "guitar", "piano", "dance", "chef", "recipe", "kitchen", "tea", "latte",
    "espresso", "brunch", "cookies", "cake", "icecream", "chocolate", "fruit", "farmers", "ferry", "island",
    "lake", "river", "trail", "bike", "ride", "walk", "neighborhood", "downtown", "waterfront", "pier",
    "needle", "sound", "rain", "drizzle", "umbrella", "jacket", "sweater", "cozy", "home", "apartment",
    "move", "garden", "flowers", "tulips", "cherry", "blossoms", "spring", "summer", "autumn", "winter",
    "snow", "ski", "lodge", "cabin", "camping", "tent", "stars", "moon", "sky", "clouds",
    "brewery", "wine", "cider", "bar", "trivia", "karaoke", "comedy", "theater", "opera", "ballet",
    "soccer", "baseball", "basketball", "football", "hockey", "stadium", "fans", "score", "goal", "playoffs",
    "startup", "coding", "design", "meetup", "conference", "talk", "slides", "launch", "release", "feature",
    "thanks", "love", "miss", "hope", "wish", "dream", "plan", "trip", "vacation", "flight",
];

const ACCIDENT: &[&str] = &[
    "crash on the highway near exit {n}",
    "accident blocking a lane, avoid the area",
    "truck and car collision, driver injured",
    "vehicle struck near the interchange {n}",
    "multi vehicle crash reported, patrol on scene",
    "injured passenger taken to hospital after crash",
    "accident involved two vehicles on the highway",
    "lane blocked after a truck crash, expect delays",
];

const CULTURE: &[&str] = &[
    "protest downtown #BlackLivesMatter",
    "justice for George Floyd",
    "marching for Breonna Taylor {n}",
    "#blm rally at the plaza",
    "say his name Ahmaud Arbery",
    "#durkanresign crowd gathering",
    "protest at city hall for Jacob Blake",
    "blm march across the bridge",
];

fn fill(template: &str, rng: &mut RngState) -> String {
    template.replace("{n}", &(1 + rng.below(180)).to_string())
}

fn filler(rng: &mut RngState, n: usize) -> Vec<&'static str> {
    (0..n).map(|_| FILLER[rng.below(FILLER.len())]).collect()
}

pub fn background(rng: &mut RngState) -> String {
    let n = 4 + rng.below(6);
    filler(rng, n).join(" ")
}

pub fn accident(rng: &mut RngState) -> String {
    let t = fill(ACCIDENT[rng.below(ACCIDENT.len())], rng);
    format!("{t} {}", filler(rng, 2).join(" "))
}

pub fn culture(rng: &mut RngState) -> String {
    let t = fill(CULTURE[rng.below(CULTURE.len())], rng);
    format!("{t} {}", filler(rng, 2).join(" "))
}
