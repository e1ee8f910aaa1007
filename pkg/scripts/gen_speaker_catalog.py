"""Regenerate the shipped speaker catalog asset (192 voice descriptions).

Deterministic: the catalog is the cartesian product of six vocal
attributes, so rerunning this script always produces the same file.
"""

import itertools
import json
from pathlib import Path

GENDERS = [("male", "his"), ("female", "her")]
ACCENTS = ["American", "British", "Canadian", "Australian"]
SPEEDS = ["slowly", "at a normal pace", "slightly fast"]
PITCHES = ["a monotone pitch", "a slightly expressive and animated pitch"]
CLARITIES = ["close-sounding and quite clean", "slightly distant but clear"]
RECORDINGS = ["good clarity", "crisp, excellent quality"]

MALE_NAMES = [
    "Luminous", "Timothy", "Marcus", "Declan", "Harvey", "Otis", "Silas",
    "Bennett", "Caleb", "Dorian", "Elliott", "Felix", "Gideon", "Hugo",
    "Ivan", "Jasper", "Kendrick", "Lachlan", "Miles", "Nolan", "Oscar",
    "Preston", "Quentin", "Ronan", "Sawyer", "Tobias", "Ulric", "Vance",
    "Wesley", "Xavier", "York", "Zane", "Ambrose", "Barnaby", "Cornelius",
    "Desmond", "Emmett", "Finnegan", "Grady", "Holden", "Ignatius",
    "Jerome", "Kasper", "Leopold", "Montgomery", "Nathaniel", "Orson",
    "Percival", "Quinlan", "Roderick", "Sebastian", "Thaddeus", "Ulysses",
    "Vincent", "Wilfred", "Xander", "Yves", "Zachariah", "Alaric",
    "Bartholomew", "Caspian", "Dashiell", "Evander", "Fitzgerald",
    "Granville", "Hamish", "Inigo", "Jethro", "Kingsley", "Lysander",
    "Mortimer", "Nikolai", "Octavius", "Peregrine", "Quincy", "Rafferty",
    "Stellan", "Tiberius", "Urban", "Valentin", "Winston", "Xerxes",
    "Yorick", "Zebedee", "Anselm", "Boris", "Crispin", "Dmitri",
    "Ernesto", "Fabian", "Gustav", "Horatio", "Ingmar", "Joaquin",
    "Klaus", "Lorenzo",
]
FEMALE_NAMES = [
    "Jocelyn", "Nadine", "Aurelia", "Beatrix", "Celeste", "Daphne",
    "Eleanor", "Fiona", "Genevieve", "Harriet", "Imogen", "Juniper",
    "Katarina", "Lavinia", "Marguerite", "Noelle", "Ophelia", "Penelope",
    "Quinn", "Rosalind", "Seraphina", "Tabitha", "Ursula", "Vivienne",
    "Willa", "Xenia", "Yvette", "Zelda", "Annabelle", "Bronwyn",
    "Clementine", "Delphine", "Esmeralda", "Francesca", "Gwendolyn",
    "Henrietta", "Isadora", "Josephine", "Kerensa", "Lucinda", "Magnolia",
    "Natalia", "Octavia", "Primrose", "Quintessa", "Rosemary", "Sylvia",
    "Theodora", "Undine", "Valentina", "Winifred", "Xiomara", "Yolanda",
    "Zinnia", "Arabella", "Bernadette", "Cordelia", "Dorothea", "Evangeline",
    "Felicity", "Georgiana", "Hermione", "Iolanthe", "Jacqueline",
    "Kalliope", "Leonora", "Mirabelle", "Nerissa", "Odette", "Perpetua",
    "Queenie", "Rowena", "Sabrina", "Temperance", "Ulrika", "Verity",
    "Wilhelmina", "Xanthe", "Ysolde", "Zephyrine", "Adelaide", "Blythe",
    "Cassandra", "Desiree", "Elspeth", "Florence", "Giselle", "Honora",
    "Ingrid", "Juliette", "Kirsten", "Lorelei", "Miranda", "Nicolette",
    "Oriana", "Petra",
]


def build_catalog():
    combos = list(itertools.product(
        GENDERS, ACCENTS, SPEEDS, PITCHES, CLARITIES, RECORDINGS))
    assert len(combos) == 192
    male_iter = iter(MALE_NAMES)
    female_iter = iter(FEMALE_NAMES)
    catalog = []
    for idx, ((gender, poss), accent, speed, pitch, clarity, rec) in enumerate(combos):
        name = next(male_iter) if gender == "male" else next(female_iter)
        description = (
            f"A {gender} voice with an {accent} accent speaks {speed}. "
            f"The speaker's voice is {clarity}, with {pitch}. "
            f"The recording captures {poss} voice with {rec}."
        ).replace("an British", "a British").replace("an Canadian", "a Canadian")
        catalog.append({
            "id": f"spk-{idx:03d}",
            "name": name,
            "description": description,
        })
    return catalog


def main():
    out = Path(__file__).resolve().parents[1] / "src/instructforge/assets/speakers.jsonl"
    with out.open("w", encoding="utf-8") as fh:
        for entry in build_catalog():
            fh.write(json.dumps(entry, ensure_ascii=False) + "\n")
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
