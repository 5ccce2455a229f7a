#!/usr/bin/env python3
"""Generate the bundled desk corpus: short tweet-like messages from a seeded
weighted grammar. Output is one message per line.

    python3 tools/make_desk_corpus.py --seed 2017 --tokens 100000 > data/desk_corpus.txt
"""

import argparse
import random

PRON = ["i", "we", "you", "they", "she", "he", "my mom", "my friend", "everyone",
        "nobody", "my sister", "my brother", "the teacher", "this guy", "that girl"]

NOUNS = """
day night morning weekend week year life game movie show song album music
coffee tea pizza food dinner lunch breakfast party class school work job boss
house room bed phone car bus train city town beach park gym store mall
friend friends family dog cat baby team season episode book story picture pic
video photo tweet account weather rain snow sun summer winter spring fall
birthday holiday vacation trip flight hotel airport doctor test exam paper
homework project meeting office computer laptop internet wifi game time money
hair face shoes shirt jacket dress outfit kitchen couch window door street
concert ticket festival band singer actor hero fans crowd road bridge river
message email text call chat news article blog podcast playlist radio tv
nap sleep dream plan idea question answer problem mistake reason chance
cake cookies chocolate ice cream burger fries salad sandwich soup juice
morning shift sunset sunrise moon stars sky ocean lake mountain forest
""".split()

ADJ = """
good bad great awesome amazing terrible boring funny weird crazy cute sweet
nice cool hot cold tired happy sad angry excited bored hungry sleepy busy
lazy perfect beautiful ugly loud quiet new old long short late early real
fake best worst favorite last first little big huge tiny fresh free
stressed annoying lovely pretty strange random serious stupid smart lucky
""".split()

ADV = ["so", "really", "very", "too", "just", "actually", "literally", "totally",
       "kinda", "pretty", "super", "still", "always", "never", "finally"]

VERBS = [
    ("love", "loves", "loved", "loving"), ("hate", "hates", "hated", "hating"),
    ("want", "wants", "wanted", "wanting"), ("need", "needs", "needed", "needing"),
    ("like", "likes", "liked", "liking"), ("miss", "misses", "missed", "missing"),
    ("watch", "watches", "watched", "watching"), ("see", "sees", "saw", "seeing"),
    ("make", "makes", "made", "making"), ("get", "gets", "got", "getting"),
    ("find", "finds", "found", "finding"), ("buy", "buys", "bought", "buying"),
    ("eat", "eats", "ate", "eating"), ("play", "plays", "played", "playing"),
    ("read", "reads", "read", "reading"), ("finish", "finishes", "finished", "finishing"),
    ("start", "starts", "started", "starting"), ("lose", "loses", "lost", "losing"),
    ("call", "calls", "called", "calling"), ("text", "texts", "texted", "texting"),
    ("fix", "fixes", "fixed", "fixing"), ("clean", "cleans", "cleaned", "cleaning"),
    ("cook", "cooks", "cooked", "cooking"), ("post", "posts", "posted", "posting"),
    ("share", "shares", "shared", "sharing"), ("visit", "visits", "visited", "visiting"),
    ("forget", "forgets", "forgot", "forgetting"), ("bring", "brings", "brought", "bringing"),
]

INTRANS = [("sleep", "sleeping", "slept"), ("go home", "going home", "went home"),
           ("work", "working", "worked"), ("dance", "dancing", "danced"),
           ("study", "studying", "studied"), ("run", "running", "ran"),
           ("cry", "crying", "cried"), ("laugh", "laughing", "laughed"),
           ("wait", "waiting", "waited"), ("relax", "relaxing", "relaxed"),
           ("travel", "traveling", "traveled"), ("sing", "singing", "sang")]

TIME = ["today", "tonight", "tomorrow", "yesterday", "right now", "this morning",
        "this weekend", "all day", "last night", "next week", "again", "already",
        "on monday", "on friday", "at work", "at school", "after class", "later"]

DET = ["the", "my", "this", "that", "your", "our", "a", "some", "every"]

INTERJ = ["lol", "omg", "haha", "lmao", "ugh", "wow", "yay", "hahaha", "smh",
          "yes", "nope", "ok", "well", "oh", "wait", "damn", "aww", "yeah"]

EMOT = [":)", ":(", ";)", ":D", "<3", ":p", "xD", "!!", "..."]

TAGS = ["#tbt", "#mondays", "#blessed", "#fail", "#win", "#nofilter", "#goals",
        "#tired", "#love", "#music", "#gameday", "#food", "#fridayfeeling"]

NAMES = ["alex", "sam", "jordan", "chris", "taylor", "jamie", "morgan", "casey",
         "riley", "drew", "max", "kim", "lee", "pat", "robin", "avery"]

DOMAINS = ["t.co", "bit.ly", "youtu.be", "insta.gr", "example.com", "news.site"]


def zipf_choice(rng, items, s=1.1):
    weights = [1.0 / (r + 1) ** s for r in range(len(items))]
    return rng.choices(items, weights=weights, k=1)[0]


class Grammar:
    def __init__(self, rng):
        self.rng = rng

    def pick(self, items):
        return zipf_choice(self.rng, items)

    def noun_phrase(self):
        r = self.rng.random()
        if r < 0.45:
            return f"{self.pick(DET)} {self.pick(NOUNS)}"
        if r < 0.75:
            return f"{self.pick(DET)} {self.pick(ADJ)} {self.pick(NOUNS)}"
        if r < 0.9:
            return self.pick(NOUNS)
        return f"{self.pick(DET)} {self.pick(NOUNS)} and {self.pick(DET)} {self.pick(NOUNS)}"

    def subject(self):
        return self.pick(PRON)

    def third_person(self, subj):
        return subj not in ("i", "we", "you", "they", "everyone")

    def verb_phrase(self, subj):
        base, third, past, ing = self.pick(VERBS)
        r = self.rng.random()
        if r < 0.3:
            v = third if self.third_person(subj) and subj != "everyone" else base
            return f"{v} {self.noun_phrase()}"
        if r < 0.55:
            return f"{past} {self.noun_phrase()} {self.pick(TIME)}"
        if r < 0.75:
            aux = "is" if self.third_person(subj) else ("am" if subj == "i" else "are")
            return f"{aux} {ing} {self.noun_phrase()}"
        if r < 0.88:
            aux = "can't" if self.rng.random() < 0.5 else "don't"
            return f"{aux} {base} {self.noun_phrase()}"
        verb = self.pick(INTRANS)
        return f"just {verb[2]} {self.pick(TIME)}"

    def clause(self):
        subj = self.subject()
        r = self.rng.random()
        if r < 0.55:
            return f"{subj} {self.verb_phrase(subj)}"
        if r < 0.7:
            be = "i'm" if subj == "i" else f"{subj} {'is' if self.third_person(subj) else 'are'}"
            return f"{be} {self.pick(ADV)} {self.pick(ADJ)}"
        if r < 0.8:
            return f"{self.noun_phrase()} is {self.pick(ADV)} {self.pick(ADJ)}"
        if r < 0.9:
            verb = self.pick(INTRANS)
            return f"i need to {verb[0]} {self.pick(TIME)}"
        return f"can't wait for {self.noun_phrase()}"

    def sentence(self):
        c = self.clause()
        r = self.rng.random()
        if r < 0.15:
            c = f"{c} because {self.clause()}"
        elif r < 0.25:
            c = f"{c} but {self.clause()}"
        end = self.rng.choices([".", "!", "?", ""], weights=[5, 3, 1, 2])[0]
        return c + end

    def message(self):
        parts = []
        if self.rng.random() < 0.12:
            parts.append(f"@{self.pick(NAMES)}{self.rng.randint(1, 999)}")
        if self.rng.random() < 0.15:
            parts.append(self.pick(INTERJ))
        for _ in range(self.rng.choices([1, 2, 3], weights=[6, 3, 1])[0]):
            parts.append(self.sentence())
        if self.rng.random() < 0.1:
            parts.append(f"http://{self.pick(DOMAINS)}/{self.rng.randint(1000, 99999)}")
        if self.rng.random() < 0.15:
            parts.append(self.pick(EMOT))
        if self.rng.random() < 0.1:
            parts.append(self.pick(TAGS))
        text = " ".join(parts)
        if self.rng.random() < 0.05:
            text = f"RT @{self.pick(NAMES)}: {text}"
        if self.rng.random() < 0.3:
            text = text[0].upper() + text[1:]
        return text


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seed", type=int, default=2017)
    ap.add_argument("--tokens", type=int, default=100000,
                    help="approximate whitespace-token budget")
    args = ap.parse_args()
    g = Grammar(random.Random(args.seed))
    total = 0
    while total < args.tokens:
        m = g.message()
        total += len(m.split())
        print(m)


if __name__ == "__main__":
    main()
