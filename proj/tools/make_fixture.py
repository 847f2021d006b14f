#!/usr/bin/env python3
"""Generates the tiny_wiki fixture: a synthetic anchor-linked corpus with
bridge questions whose answer passages share no words with the question."""

import argparse
import json
import random
from pathlib import Path

FIRST = ["Ada", "Boris", "Clara", "Dmitri", "Elena", "Farid", "Greta", "Hugo",
         "Ines", "Jonas", "Kira", "Lorenzo", "Mila", "Nikolai", "Olga", "Pavel",
         "Quinn", "Rosa", "Stefan", "Tamsin", "Ulrich", "Vera", "Wendel", "Yara"]
LAST = ["Albescu", "Brandt", "Castell", "Dorsey", "Eklund", "Falk", "Gorin", "Halloran",
        "Ivers", "Jansky", "Kovac", "Lindqvist", "Moreau", "Novak", "Ostrowski", "Pell",
        "Quarry", "Rennick", "Sorel", "Tavish", "Ulvang", "Varga", "Whitlock", "Zeller"]
# One value per person, so every answer string names exactly one passage.
NATIONALITIES = ["Chilean", "Danish", "Hungarian", "Irish", "Moroccan", "Norwegian", "Peruvian", "Scottish",
                 "Finnish", "Greek", "Polish", "Welsh", "Austrian", "Belgian", "Czech", "Dutch",
                 "Estonian", "Icelandic", "Kenyan", "Latvian", "Maltese", "Nepalese", "Swiss", "Turkish"]
INSTRUMENTS = ["violin", "cello", "oboe", "harp", "trumpet", "clarinet", "bassoon", "mandolin",
               "flute", "piccolo", "tuba", "trombone", "banjo", "ukulele", "accordion", "harpsichord",
               "viola", "lute", "sitar", "zither", "marimba", "xylophone", "bagpipes", "saxophone"]
HOMETOWNS = ["Ashcombe", "Brindlemoor", "Cobbleton", "Dunmarsh", "Elderwick", "Fernhollow", "Glenbarrow",
             "Hazelford", "Ivybridge", "Juniper Falls", "Kestrelby", "Larkspur", "Millbrook", "Nettlefield",
             "Oakhurst", "Pebbleworth", "Quillan", "Rookhaven", "Sedgewater", "Thornbury", "Umberlea",
             "Wrenfield", "Yarrowby", "Zelham"]
CITIES = [("Lyon", "France"), ("Porto", "Portugal"), ("Kyoto", "Japan"), ("Dublin", "Ireland"),
          ("Tucson", "Arizona"), ("Bergen", "Norway"), ("Cusco", "Peru"), ("Perth", "Australia")]
STUDIOS = ["Harborlight Pictures", "Northgate Studios", "Bluebell Films", "Ironwood Pictures",
           "Silverpine Studios", "Copperfield Films", "Meridian Pictures", "Starling Studios"]
ADJ = ["Silent", "Crimson", "Hollow", "Golden", "Distant", "Frozen", "Velvet", "Broken", "Hidden", "Scarlet"]
NOUN = ["Harbor", "Valley", "Lantern", "Orchard", "Meadow", "Compass", "Tide", "Summit", "Bridge", "Garden"]
GENRES = ["drama", "comedy", "western", "mystery", "musical", "thriller"]

RELATIONS = {
    "director": ("What instrument does the director of {film} play?", "instrument"),
    "star": ("Which town raised the star of {film}?", "hometown"),
    "composer": ("What nationality has the composer for {film}?", "nationality"),
}


class PassageBuilder:
    def __init__(self):
        self.text = ""
        self.anchors = []

    def add(self, s):
        self.text += s
        return self

    def link(self, surface, target):
        start = len(self.text)  # Python indexes code points
        self.text += surface
        self.anchors.append({"target": target, "start": start, "end": len(self.text)})
        return self


def build(seed):
    rng = random.Random(seed)
    people = []
    for i in range(24):
        people.append({
            "title": f"{FIRST[i]} {LAST[i]}",
            "first": FIRST[i],
            "nationality": NATIONALITIES[i],
            "instrument": INSTRUMENTS[i],
            "hometown": HOMETOWNS[(i * 5) % len(HOMETOWNS)],
        })
    rng.shuffle(people)

    names = [f"{a} {n}" for a in ADJ for n in NOUN]
    rng.shuffle(names)
    films = []
    for i in range(20):
        director, star, composer = rng.sample(people, 3)
        city = rng.choice([c for c, _ in CITIES])
        year = 1940 + rng.randrange(30)
        films.append({
            "name": names[i],
            "title": f"{names[i]} ({year} film)",
            "year": year,
            "genre": rng.choice(GENRES),
            "director": director,
            "star": star,
            "composer": composer,
            "studio": rng.choice(STUDIOS),
            "city": city,
        })

    passages = []

    def emit(title, builder):
        passages.append({"id": f"p{len(passages):03d}", "title": title, "text": builder.text,
                         "anchors": builder.anchors})

    for f in films:
        b = PassageBuilder().add(f"{f['name']} is a {f['year']} {f['genre']} film directed by ")
        b.link(f["director"]["title"], f["director"]["title"]).add(". It stars ")
        b.link(f["star"]["title"], f["star"]["title"]).add(", with music composed by ")
        b.link(f["composer"]["title"], f["composer"]["title"]).add(". The film was produced by ")
        b.link(f["studio"], f["studio"]).add(" and shot in ")
        b.link(f["city"], f["city"]).add(".")
        emit(f["title"], b)
    for p in sorted(people, key=lambda p: p["title"]):
        b = PassageBuilder().add(f"{p['title']} is a {p['nationality']} artist. {p['first']} grew up in "
                                 f"{p['hometown']} and became a {p['instrument']} virtuoso.")
        emit(p["title"], b)
    for city, region in CITIES:
        emit(city, PassageBuilder().add(f"{city} is a city in {region}, known for its old markets and bridges."))
    for i, studio in enumerate(STUDIOS):
        home = CITIES[(i * 3) % len(CITIES)][0]
        b = PassageBuilder().add(f"{studio} is a production company founded in {1920 + 2 * i}, based in ")
        b.link(home, home).add(".")
        emit(studio, b)

    pairs = [(f, rel) for f in films for rel in RELATIONS]
    rng.shuffle(pairs)
    pairs = pairs[:36]
    bridge = []
    for n, (f, rel) in enumerate(pairs):
        template, attr = RELATIONS[rel]
        person = f[rel]
        bridge.append({
            "id": f"b{n:02d}",
            "question": template.format(film=f["name"]),
            "answer": person[attr],
            "type": "bridge",
            "supporting_titles": [f["title"], person["title"]],
        })

    comparison = []
    for n in range(12):
        a, b = rng.sample(films, 2)
        if n % 2 == 0:
            question = f"Were {a['name']} and {b['name']} released in the same year?"
            answer = "yes" if a["year"] == b["year"] else "no"
        else:
            question = f"Was {a['name']} released before {b['name']}?"
            answer = "yes" if a["year"] < b["year"] else "no"
        comparison.append({"id": f"c{n:02d}", "question": question, "answer": answer, "type": "comparison",
                           "supporting_titles": [a["title"], b["title"]]})

    train = bridge[:24] + comparison[:8]
    dev = bridge[24:] + comparison[8:]
    return passages, train, dev


def embeddings(passages, questions, dim, seed):
    """Random vectors with shared directions for related words, standing in
    for pre-trained embeddings."""
    rng = random.Random(seed)

    def vec(scale=1.0):
        return [rng.gauss(0.0, scale) for _ in range(dim)]

    groups = {
        "instrument": ["instrument", "play", "virtuoso"] + INSTRUMENTS,
        "nationality": ["nationality", "artist"] + [n.lower() for n in NATIONALITIES],
        "town": ["town", "city", "raised", "grew"] + [w.lower() for h in HOMETOWNS for w in h.split()],
        "director": ["director", "directed"],
        "star": ["star", "stars"],
        "composer": ["composer", "composed", "music"],
    }
    base = {g: vec() for g in groups}
    table = {}
    for g, words in groups.items():
        for w in words:
            noise = vec(0.35)
            table[w] = [b + e for b, e in zip(base[g], noise)]

    import re
    words = set()
    for p in passages:
        words.update(re.findall(r"\w+", (p["title"] + " " + p["text"]).lower()))
    for q in questions:
        words.update(re.findall(r"\w+", q["question"].lower()))
    for w in sorted(words):
        if w not in table:
            table[w] = vec(0.5)
    return {w: [round(x / 4.0, 5) for x in v] for w, v in sorted(table.items())}


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=Path(__file__).resolve().parent.parent / "data" / "tiny_wiki")
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--dim", type=int, default=16)
    args = ap.parse_args()
    passages, train, dev = build(args.seed)
    args.out.mkdir(parents=True, exist_ok=True)

    def dump(name, rows):
        with open(args.out / name, "w", encoding="utf-8") as fh:
            for r in rows:
                fh.write(json.dumps(r, ensure_ascii=False) + "\n")

    dump("corpus.jsonl", passages)
    dump("train.jsonl", train)
    dump("dev.jsonl", dev)
    with open(args.out / "embeddings.txt", "w", encoding="utf-8") as fh:
        for w, v in embeddings(passages, train + dev, args.dim, args.seed + 1).items():
            fh.write(w + " " + " ".join(f"{x:.5f}" for x in v) + "\n")
    config = {"corpus": "corpus.jsonl", "train_questions": "train.jsonl", "dev_questions": "dev.jsonl",
              "embeddings": "embeddings.txt", "output_dir": "../../runs/tiny_wiki"}
    with open(args.out / "config.json", "w", encoding="utf-8") as fh:
        json.dump(config, fh, indent=2)
        fh.write("\n")
    print(f"{len(passages)} passages, {len(train)} train, {len(dev)} dev questions -> {args.out}")


if __name__ == "__main__":
    main()
