"""Synthetic end-to-end fixture with known ground truth.

Builds a small world (people with nationalities, professions, employers,
birthplaces; countries with cities and capitals) as a knowledge graph, plus
a corpus whose surface predicates are noisy correlates of graph queries, a
fill-in-the-blank query set, and a judgment pool derived from the world's
ground truth.

A slice of people is held out of the corpus: their entity pairs are never
seen at training time, so a purely distributional model cannot score them
while the graph still can.  One relation predicate (``national_N/N``) is
planted as an exact correlate of the single graph query ``<nationality_inv>``
to make feature recovery checkable.
"""

from __future__ import annotations

import json
import os

import numpy as np

# the planted exact-correlate predicate and the graph query it mirrors
PLANTED_PREDICATE = "national_N/N"
PLANTED_FEATURE = "<nationality_inv>"

N_PERSONS = 180
N_COUNTRIES = 10
N_COMPANIES = 8
N_EMPLOYED = 60
PROFESSIONS = ("architect", "writer", "athlete")

DEFAULT_FIXTURE_SEED = 13


def _instance(name, arity, args):
    return {"instance": {"predicate": name, "arity": arity, "args": list(args)}}


def generate_fixture(outdir: str, seed: int = DEFAULT_FIXTURE_SEED) -> dict[str, str]:
    """Write kb/mediators/corpus/queries/pool/config files; returns their paths."""
    rng = np.random.default_rng(seed)
    os.makedirs(outdir, exist_ok=True)

    persons = [f"person_{i:03d}" for i in range(N_PERSONS)]
    countries = [f"country_{i:02d}" for i in range(N_COUNTRIES)]
    companies = [f"company_{i}" for i in range(N_COMPANIES)]
    cities = [f"city_{i:02d}" for i in range(2 * N_COUNTRIES)]
    profession_node = {t: f"profession_{t}" for t in PROFESSIONS}

    nationality = {p: countries[int(rng.integers(N_COUNTRIES))] for p in persons}
    profession = {
        p: PROFESSIONS[int(rng.choice(3, p=[0.4, 0.3, 0.3]))] for p in persons
    }
    # cities 2j, 2j+1 belong to country j; 2j is the capital
    city_country = {cities[i]: countries[i // 2] for i in range(len(cities))}
    born_in = {}
    for p in persons:
        c = nationality[p]
        home = [city for city, cc in city_country.items() if cc == c]
        if rng.random() < 0.7:
            born_in[p] = home[int(rng.integers(len(home)))]
        else:
            born_in[p] = cities[int(rng.integers(len(cities)))]
    lives_in = {p: cities[int(rng.integers(len(cities)))] for p in persons}

    employed = [persons[i] for i in sorted(rng.choice(N_PERSONS, size=N_EMPLOYED, replace=False))]
    employer = {p: companies[i % N_COMPANIES] for i, p in enumerate(employed)}
    mediator_of = {p: f"employment_{i:03d}" for i, p in enumerate(employed)}
    founder = {co: persons[int(rng.integers(N_PERSONS))] for co in companies}
    leader = {co: persons[int(rng.integers(N_PERSONS))] for co in companies}

    friends = []
    while len(friends) < 100:
        a, b = rng.choice(N_PERSONS, size=2, replace=False)
        friends.append((persons[int(a)], persons[int(b)]))
    favorites = []
    while len(favorites) < 80:
        c = countries[int(rng.integers(N_COUNTRIES))]
        p = persons[int(rng.integers(N_PERSONS))]
        if (c, p) not in favorites:
            favorites.append((c, p))

    # Held-out people: no relation instance ever mentions them, so all their
    # pairs are unseen in training; the fully hidden half lacks category
    # instances too.  Half the held-out slice is employed so that two-entity
    # queries have held-out answers.
    not_employed = [p for p in persons if p not in employer]
    held_employed = [employed[int(i)] for i in sorted(rng.choice(len(employed), size=12, replace=False))]
    held_rest = [not_employed[int(i)] for i in sorted(rng.choice(len(not_employed), size=24, replace=False))]
    held_out = set(held_employed) | set(held_rest)
    fully_hidden = set(sorted(held_out)[: len(held_out) // 2])

    # -- knowledge graph -------------------------------------------------
    triples = []
    for p in persons:
        triples.append((p, "nationality", nationality[p]))
        triples.append((p, "has_profession", profession_node[profession[p]]))
        triples.append((p, "born_in", born_in[p]))
        triples.append((p, "lives_in", lives_in[p]))
    for city in cities:
        triples.append((city, "city_in", city_country[city]))
    for j in range(N_COUNTRIES):
        triples.append((cities[2 * j], "capital_of", countries[j]))
    for p in employed:
        triples.append((p, "has_employment", mediator_of[p]))
        triples.append((mediator_of[p], "employer", employer[p]))
    for co in companies:
        triples.append((founder[co], "founded", co))
        triples.append((leader[co], "leads", co))
    for a, b in friends:
        triples.append((a, "friend_of", b))
    for _ in range(10):
        a, b = rng.choice(N_COUNTRIES, size=2, replace=False)
        triples.append((countries[int(a)], "trade_partner", countries[int(b)]))

    # -- corpus ------------------------------------------------------------
    records = []
    for p in persons:
        t = profession[p]
        if p not in fully_hidden:
            if rng.random() < 0.8:
                records.append(_instance(t, 1, [p]))
            if rng.random() < 0.03:
                wrong = [x for x in PROFESSIONS if x != t]
                records.append(_instance(wrong[int(rng.integers(2))], 1, [p]))
            if t == "architect":
                records.append(_instance("registered_architect", 1, [p]))
        if p not in held_out:
            records.append(_instance(PLANTED_PREDICATE, 2, [nationality[p], p]))
            if rng.random() < 0.75:
                records.append(_instance(f"{t}_N/N", 2, [nationality[p], p]))
            if p in employer and rng.random() < 0.8:
                records.append(_instance("employee_N/N", 2, [employer[p], p]))
    for co in companies:
        records.append(_instance("founder_of", 2, [founder[co], co]))
    for a, b in friends:
        if a not in held_out and b not in held_out and rng.random() < 0.7:
            records.append(_instance("'s_friend", 2, [a, b]))
    for c, p in favorites:
        if p not in held_out:
            records.append(_instance("favorite_N/N", 2, [c, p]))
    for i in range(5):  # below the rare-predicate floor; filtered out
        records.append(_instance("visionary", 1, [persons[i]]))

    # a few sentence records so extraction runs inside the pipeline too
    arch = next(p for p in persons if profession[p] == "architect" and p not in fully_hidden)
    co0 = companies[0]
    friend_a, friend_b = friends[0]
    records.append(
        {
            "sentence": {
                "tokens": [["Native", "ENTITY"], ["architect", "NOUN"], [arch, "ENTITY"]],
                "mentions": [[0, 1, nationality[arch]], [2, 3, arch]],
            }
        }
    )
    records.append(
        {
            "sentence": {
                "tokens": [
                    [founder[co0], "ENTITY"],
                    [",", "OTHER"],
                    ["founder", "NOUN"],
                    ["of", "PREP"],
                    [co0, "ENTITY"],
                ],
                "mentions": [[0, 1, founder[co0]], [4, 5, co0]],
            }
        }
    )
    records.append(
        {
            "sentence": {
                "tokens": [
                    [friend_a, "ENTITY"],
                    ["'s", "POSS"],
                    ["friend", "NOUN"],
                    [friend_b, "ENTITY"],
                ],
                "mentions": [[0, 1, friend_a], [3, 4, friend_b]],
            }
        }
    )

    # -- queries and judgment pool ------------------------------------------
    queries = []
    pool_rows = []

    def add_query(qid, categories, relations, correct):
        queries.append(
            {"id": qid, "categories": categories, "relations": relations, "blank": "x"}
        )
        for entity in sorted(correct):
            pool_rows.append((qid, entity, 1))
        judged_wrong = [p for p in persons if p not in correct][:3]
        for entity in judged_wrong:
            pool_rows.append((qid, entity, 0))

    n_a = 0
    for c in countries:
        for t in PROFESSIONS:
            matches = {p for p in persons if nationality[p] == c and profession[p] == t}
            if len(matches) >= 3 and n_a < 12:
                n_a += 1
                add_query(
                    f"a{n_a:02d}",
                    [[t, "x"]],
                    [[f"{t}_N/N", c, "x"]],
                    matches,
                )

    anchors = held_employed[:4] + [p for p in employed if p not in held_out][:4]
    for i, p in enumerate(anchors, start=1):
        c, t, co = nationality[p], profession[p], employer[p]
        matches = {
            q
            for q in persons
            if nationality[q] == c and profession[q] == t and employer.get(q) == co
        }
        add_query(f"b{i:02d}", [[t, "x"]], [[f"{t}_N/N", c, "x"], ["employee_N/N", co, "x"]], matches)

    n_c = 0
    for c in countries:
        liked = {p for cc, p in favorites if cc == c and p not in held_out}
        if len(liked) >= 2 and n_c < 6:
            n_c += 1
            add_query(f"c{n_c:02d}", [], [["favorite_N/N", c, "x"]], liked)

    for i, co in enumerate(companies[:2], start=1):
        add_query(f"d{i:02d}", [], [["founder_of", "x", co]], {founder[co]})
    for i, co in enumerate(companies[2:4], start=1):
        staff = {p for p in employed if employer[p] == co}
        add_query(f"e{i:02d}", [], [["employee_N/N", co, "x"]], staff)

    for i, c in enumerate(countries[:2], start=1):
        nationals = {p for p in persons if nationality[p] == c}
        add_query(f"u{i:02d}", [], [["martian_N/N", c, "x"]], nationals)

    for i, (a, _) in enumerate(friends[:2], start=1):
        buddies = {y for x, y in friends if x == a} | {x for x, y in friends if y == a}
        add_query(f"f{i:02d}", [], [["'s_friend", a, "x"]], buddies)

    # -- write everything ----------------------------------------------------
    paths = {
        "kb": os.path.join(outdir, "kb.tsv"),
        "mediators": os.path.join(outdir, "mediators.txt"),
        "corpus": os.path.join(outdir, "corpus.jsonl"),
        "queries": os.path.join(outdir, "queries.jsonl"),
        "pool": os.path.join(outdir, "pool.tsv"),
        "config": os.path.join(outdir, "config.json"),
    }
    with open(paths["kb"], "w", encoding="utf-8") as handle:
        for s, r, o in triples:
            handle.write(f"{s}\t{r}\t{o}\n")
    with open(paths["mediators"], "w", encoding="utf-8") as handle:
        for p in employed:
            handle.write(mediator_of[p] + "\n")
    with open(paths["corpus"], "w", encoding="utf-8") as handle:
        for record in records:
            handle.write(json.dumps(record) + "\n")
    with open(paths["queries"], "w", encoding="utf-8") as handle:
        for query in queries:
            handle.write(json.dumps(query) + "\n")
    with open(paths["pool"], "w", encoding="utf-8") as handle:
        for qid, entity, label in pool_rows:
            handle.write(f"{qid}\t{entity}\t{label}\n")
    config = {
        "kb": paths["kb"],
        "mediators": paths["mediators"],
        "corpus": paths["corpus"],
        "queries": paths["queries"],
        "pool": paths["pool"],
        "workdir": os.path.join(outdir, "work"),
        "dim": 50,
        "epochs": 20,
        "learning_rate": 0.1,
        "negatives_per_positive": 10,
        "l2": 1e-4,
        "seed": 7,
        "max_path_len": 2,
        "fanout_cap": 100,
        "top_k": 100,
        "min_feature_count": 5,
        "min_predicate_count": 6,
        "ap_mode": "paper",
    }
    with open(paths["config"], "w", encoding="utf-8") as handle:
        json.dump(config, handle, indent=2, sort_keys=True)
        handle.write("\n")
    return paths


def main(argv=None) -> int:
    import argparse

    parser = argparse.ArgumentParser(description="generate the synthetic fixture")
    parser.add_argument("outdir")
    parser.add_argument("--seed", type=int, default=DEFAULT_FIXTURE_SEED)
    args = parser.parse_args(argv)
    paths = generate_fixture(args.outdir, seed=args.seed)
    for name, path in sorted(paths.items()):
        print(f"{name}\t{path}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
