"""Synthetic "Meet & Greet / Simon Says" corpus generator.

One seeded call produces everything the pipeline trains on: a domain
(48 user intents incl. physical moves, 48 agent actions), labeled
utterances for the 26 verbal intents, dialog stories with cooperative
and uncooperative paths, precomputed sentence-embedding dumps, and
response-adaptation cases.

Structural guarantee of the default profile: every system decision,
including the decision to yield the floor, is a function of the last
three turns, so a perfect policy exists (asserted at generation time
via the brute-force window oracle).  The "reprompt" digression style
deliberately breaks this locality: after an in-game digression the bot
resumes without restating the pending command, so recovering it needs
memory of earlier turns.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, asdict, replace
from pathlib import Path

import numpy as np

from .corpus import (
    USER, SYSTEM, AdaptationCase, Domain, GenerationError, IntentSpec,
    NLUExample, Story, Turn, save_adaptation_cases, load_adaptation_cases,
    serialize_nlu_data, serialize_stories, solvability_conflicts,
    _round_half_up,
)
from .adapt import content_stems, is_content_word, stem_token
from .featurize import ExternalEmbeddingTable, tokenize

# ---------------------------------------------------------------------------
# domain inventory
# ---------------------------------------------------------------------------

MOVES = (
    "touch_head", "touch_nose", "clap_hands", "raise_arms", "stomp_feet",
    "turn_around", "jump_up", "wave_hand", "touch_ears", "shake_head",
    "nod_head", "touch_shoulders", "blink_eyes", "point_up", "touch_knees",
    "spin_around", "hop_once", "wiggle_fingers", "pat_tummy", "rub_hands",
    "snap_fingers", "touch_toes",
)

GOAL_INTENTS = (
    "greet", "mynameis", "user_ask_name", "ask_how_doing", "user_doing_good",
    "user_doing_bad", "wrongname", "affirm", "deny", "ask_rules",
    "user_missed_it", "user_done_playing", "next_step", "goodbye", "thanks",
    "repeat_please",
)

NONGOAL_INTENTS = (
    "ask_about_bot", "out_of_scope", "complaint", "request_help",
    "user_i_am_sick", "chitchat_like", "chitchat_school", "chitchat_age",
    "chitchat_pet", "chitchat_weather",
)

DIGRESSION_RESPONSE = {
    "ask_about_bot": "utter_bot_info",
    "out_of_scope": "utter_out_of_scope",
    "complaint": "utter_handle_complaint",
    "request_help": "utter_offer_help",
    "user_i_am_sick": "utter_sympathy",
    "chitchat_like": "utter_chitchat_like",
    "chitchat_school": "utter_chitchat_school",
    "chitchat_age": "utter_chitchat_age",
    "chitchat_pet": "utter_chitchat_pet",
    "chitchat_weather": "utter_chitchat_weather",
}

TASK_ACTIONS = (
    "utter_greet", "utter_nice_to_meet", "utter_apologize_name",
    "utter_my_name", "utter_doing_great", "utter_glad_to_hear",
    "utter_sorry_to_hear", "utter_intro_game", "utter_explain_rules",
    "utter_praise", "utter_try_again", "utter_encourage", "utter_welcome",
    "utter_game_over", "utter_lets_resume", "utter_goodbye",
)


def phys_intent(move: str) -> str:
    return f"phys_{move}"


def simon_action(move: str) -> str:
    return f"utter_simon_says_{move}"


def next_move(move: str) -> str:
    return MOVES[(MOVES.index(move) + 1) % len(MOVES)]


ACTION_TEMPLATES = {
    "utter_greet": ("hi there , i am robo ! what is your name ?",
                    "hello hello ! i am robo . what is your name ?"),
    "utter_nice_to_meet": ("nice to meet you ! how are you doing today ?",
                           "what a great name ! how are you today ?"),
    "utter_apologize_name": ("oops , sorry about that ! what is your name then ?",),
    "utter_my_name": ("my name is robo ! and what is your name ?",),
    "utter_doing_great": ("i am doing great , thanks for asking ! how about you ?",),
    "utter_glad_to_hear": ("glad to hear that ! are you ready to play simon says ?",
                           "yay ! so , are you ready to play simon says ?"),
    "utter_sorry_to_hear": ("aww , sorry to hear that . maybe a game will cheer you up ."
                            " ready to play simon says ?",),
    "utter_intro_game": ("alright , here we go ! when i say simon says , you do the move !",),
    "utter_explain_rules": ("the rules are simple : when i say simon says , you do the move !",
                            "easy peasy : i call a move with simon says , and you do it !"),
    "utter_praise": ("great job , you nailed it !", "wow , you did super !"),
    "utter_try_again": ("oops , that was not quite it . let us try again !",),
    "utter_encourage": ("no worries , you can do it ! one more try !",),
    "utter_welcome": ("you are very welcome !",),
    "utter_game_over": ("you did great today , that was really fun ! bye bye !",),
    "utter_lets_resume": ("anyway , back to our game ! go ahead !",
                          "okay okay , where were we ? your turn !"),
    "utter_goodbye": ("bye bye , see you next time !", "goodbye , come play again soon !"),
    "utter_bot_info": ("i am robo , a friendly robot who loves games ! anyway ,",
                       "i am just a happy little robot !"),
    "utter_out_of_scope": ("hmm , i do not know about that one .",
                          "that is outside my little robot head ."),
    "utter_handle_complaint": ("oh no , sorry you feel that way ! i will try to do better .",),
    "utter_offer_help": ("i am here to help ! just follow along with me .",),
    "utter_sympathy": ("oh no , i hope you feel better soon !",),
    "utter_chitchat_like": ("ooh , that sounds lovely !",),
    "utter_chitchat_school": ("school sounds like quite an adventure !",),
    "utter_chitchat_age": ("what a wonderful age to be !",),
    "utter_chitchat_pet": ("aww , animal friends are the best !",),
    "utter_chitchat_weather": ("i hope the sky is friendly today !",),
}


def build_domain() -> Domain:
    intents = (
        tuple(IntentSpec(n, goal=True) for n in GOAL_INTENTS)
        + tuple(IntentSpec(n, goal=False) for n in NONGOAL_INTENTS)
        + tuple(IntentSpec(phys_intent(m), goal=True, physical=True) for m in MOVES)
    )
    templates = dict(ACTION_TEMPLATES)
    for m in MOVES:
        templates[simon_action(m)] = (f"simon says {m.replace('_', ' ')} !",)
    actions = (
        TASK_ACTIONS
        + tuple(DIGRESSION_RESPONSE[g] for g in NONGOAL_INTENTS)
        + tuple(simon_action(m) for m in MOVES)
    )
    return Domain(intents=intents, actions=actions, templates=templates)


# ---------------------------------------------------------------------------
# paraphrase pools for the 26 verbal intents
# ---------------------------------------------------------------------------

#: Function and frame words shared across many intents. Pool items may use
#: these freely; they never count as an intent cue.
_FRAME_WORDS = frozenset("""
    i a an the is are am im was were be been being me my mine you your yours
    it its we us our they them he she his her to do does did dont didnt
    doesnt of and or but so in on at for from with by this that these those
    there here have has had having can cant could couldnt will wont would
    should may might must not no yes what whats how who when where why which
    if then than please really very too also now today tomorrow yesterday
    tonight soon later again just once some any all more most much many lot
    lots oh hey hmm umm uh huh wait ok okay get got gets getting go goes
    going gone went want wanted wants know knows said say says see seen tell
    tells told come comes coming make makes making made keep keeps still
    about out up down over under little big new nice fun cool best ever
    ? ! . , '
""".split())


def validate_paraphrase_pools() -> list[str]:
    """Check that every pool item carries a learnable intent cue.

    A cue is a non-frame token occurring in at least two items of the
    same pool, or a frame token concentrated in the pool (three or more
    items), so any train/test split of the pool leaves the token
    trainable with high probability. Returns human-readable violations.
    """
    problems = []
    for intent, pool in sorted(PARAPHRASES.items()):
        counts: dict[str, int] = {}
        for text in pool:
            for tok in set(tokenize(text).tokens):
                counts[tok] = counts.get(tok, 0) + 1
        cues = {t for t, c in counts.items()
                if c >= (3 if t in _FRAME_WORDS else 2)}
        for text in pool:
            if not set(tokenize(text).tokens) & cues:
                problems.append(f"{intent}: {text!r} has no repeated content cue")
    return problems


def _expand(*parts):
    out = []
    for combo in itertools.product(*parts):
        text = " ".join(p for p in combo if p)
        out.append(text)
    return out


_NAMES = ("sam", "max", "lily", "noah", "emma", "ben", "mia", "leo", "zoe", "ava")

PARAPHRASES: dict[str, tuple[str, ...]] = {
    "greet": tuple(
        _expand(["hi", "hello", "hey", "heya", "howdy", "yo"],
                ["", "there", "robot", "buddy", "friend", "simon"])
        + ["good morning", "good morning robot", "hi hi", "hello hello",
           "hey hey robot", "hello mister robot", "whats up", "whats up robot",
           "whats up buddy", "hello little robot", "hiya", "hiya robot",
           "good morning to you"]
    ),
    "mynameis": tuple(
        _expand(["my name is", "i am", "im", "i am called", "they call me",
                 "call me", "people call me"], list(_NAMES))
        + [f"{n} is my name" for n in _NAMES[:5]]
        + [f"the name is {n}" for n in _NAMES[5:]]
    ),
    "user_ask_name": tuple(
        _expand(["what is your name", "whats your name", "who are you",
                 "what do i call you", "what should i call you",
                 "tell me your name", "do you have a name",
                 "what are you called", "whats your name robot",
                 "who are you robot", "what is your name then",
                 "say your name", "whats your name again",
                 "may i know your name", "can you tell me your name"],
                ["", "?"])
        + ["and your name is", "and whats your name robot", "and whats your name",
           "what about your name", "hey whats your name",
           "umm what is your name", "robot what is your name",
           "please tell me your name", "i want to know your name",
           "your name please", "first tell me who you are"]
    ),
    "ask_how_doing": tuple(
        _expand(["how are you", "how are you doing", "how do you do",
                 "how are you today", "hows it going", "how is it going",
                 "are you doing okay", "hows your day", "hows everything with you",
                 "how are you doing today", "you doing okay",
                 "is everything okay with you", "hows everything",
                 "how is your day going", "how about you"],
                ["", "?"])
        + ["and how are you ?", "and how are you doing", "hows life robot",
           "hows your day today", "hows it going today", "doing okay today ?",
           "hows it hanging", "how was your day", "everything okay with you ?",
           "so how are you", "what about you how are you"]
    ),
    "user_doing_good": (
        "i am good", "im good", "i am fine", "im fine", "i am great",
        "im great", "doing good", "doing great", "doing fine",
        "pretty good", "really good", "super good", "so good", "very good",
        "good", "great", "i feel good", "i feel great", "i feel happy",
        "i am happy", "im happy", "happy today", "i am doing good",
        "i am doing great", "i am doing fine", "im doing good",
        "im doing great", "all good", "i am wonderful", "im wonderful",
        "i feel wonderful", "i feel awesome", "im awesome", "i am awesome",
        "its a good day", "i am having a good day", "i feel good today",
        "my day is good", "my day is great", "feeling good",
        "feeling great", "super duper good",
    ),
    "user_doing_bad": (
        "i am sad", "im sad", "i feel sad", "so sad", "a little sad",
        "i am a little sad", "im kind of sad", "kinda sad today",
        "sad today", "feeling sad", "i feel so sad", "i am really sad",
        "really sad today", "im so sad", "not great", "not well",
        "not okay", "i am not okay", "im not okay",
        "i dont feel well", "i feel bad", "feeling bad", "im feeling bad",
        "bad", "bad day", "i had a bad day", "my day was bad",
        "today was bad", "everything is bad", "my day is bad",
        "i feel tired", "i am tired", "im tired", "so tired today",
        "i am bored", "im bored", "i am upset", "im upset", "upset today",
        "i am grumpy", "im grumpy", "grumpy today",
    ),
    "wrongname": (
        "that is not my name", "thats not my name", "no that is wrong",
        "you got my name wrong", "wrong name", "not my name",
        "that aint my name", "that ain't my name", "i did not say that name",
        "thats wrong", "no no that is not my name", "you said it wrong",
        "you said my name wrong", "my name is not that", "thats a different name",
        "that is someone elses name", "no thats not it",
        "you got it wrong", "not quite my name", "nope wrong name",
        "that is the wrong name", "no my name is different",
        "you misheard my name", "you heard my name wrong",
        "it is not my name", "not that name", "no not that name",
        "thats not what i said", "thats the wrong name silly",
        "not me wrong name", "who is that thats not me",
        "wrong wrong wrong",
        "not even close to my name", "no silly that is wrong",
        "you mixed my name up", "you mixed up my name",
        "that name is wrong", "that name is not mine",
        "never said that name", "oops wrong name", "huh thats not my name",
    ),
    "affirm": (
        "yes", "yeah", "yep", "yup", "sure", "okay", "ok", "yes please",
        "oh yes", "yes yes", "yeah sure", "sure yes", "okay yes", "ok yes",
        "yep yep", "sure okay", "okay sure", "yes definitely",
        "yeah definitely", "yes i am ready", "yeah i am ready",
        "okay im ready", "yes lets play", "okay lets play",
        "yeah lets play", "sure lets play", "yes lets do it",
        "okay lets do it", "yes lets go", "okay lets go", "yeah lets go",
        "sure thing", "yeah okay", "okay yeah", "yes sure", "yes of course",
        "sure i am ready", "okay okay yes", "yeah yeah", "yup im ready",
        "yep lets play", "yes im in", "ok sure", "yup yup",
    ),
    "deny": (
        "no", "nope", "nah", "no way", "not yet", "no thanks",
        "no thank you", "not now", "no not now", "i dont want to yet",
        "i do not want to yet", "no maybe later", "not really",
        "no not yet", "no not really", "nah not yet", "no no", "no no no",
        "hmm no", "umm no", "nope not yet", "nope nope", "nah no",
        "no not today", "not today", "no im not ready", "i am not ready",
        "im not ready", "not ready", "not ready yet", "no wait", "wait no",
        "no hold on", "no dont", "no i dont think so", "i dont think so",
        "nah not really", "no thanks not now", "no thanks not today",
        "no thank you not now", "not right now", "no later please",
        "i dont want to right now", "no sir",
    ),
    "ask_rules": (
        "how do i play", "how do we play", "what are the rules",
        "tell me the rules", "explain the rules", "how does it work",
        "how does the game work", "what do i do", "what do i have to do",
        "what am i supposed to do", "what am i supposed to do now",
        "what do i do now", "what do i do in this game", "rules please",
        "what are the rules of the game", "say the rules again",
        "can you explain", "explain please",
        "what is simon says", "how do you play simon says",
        "wait how do i play", "huh how does this work",
        "what are the rules again", "tell me how to play", "how to play",
        "i forgot the rules", "explain the game", "tell me the rules again",
        "i dont know how to play", "teach me the rules",
        "teach me how to play", "can you explain the rules",
        "say the rules", "what does simon says mean", "im confused",
        "i am confused", "confused", "how do i win the game",
        "what happens if i lose the game", "remind me the rules",
        "the rules please",
        "i wanna know the rules", "how do we win the game", "wait what are the rules",
    ),
    "user_missed_it": (
        "i missed it", "i missed that", "missed it", "oops i missed it",
        "oh no i missed", "whoops i missed", "aww i missed",
        "aw man i missed", "wait i missed it", "i think i missed",
        "i blinked and missed it", "i cant do it that fast",
        "it was too fast for me", "that is too hard for me",
        "i couldnt do it in time", "too fast", "that was too fast",
        "way too fast", "slow down please", "i was too slow",
        "i missed my turn", "i missed that one", "oops", "whoops",
        "oops i messed up", "i messed up", "i messed it up",
        "my bad i missed", "i failed", "i failed it", "i failed that one",
        "too hard", "that is too hard", "i did it wrong",
        "did i do it wrong", "i lost track and missed it",
        "it was too quick", "too quick", "i tripped and missed it",
        "too slow for me", "i got confused and missed it",
        "i did not get it in time", "i ran out of time",
        "that one was tricky and i missed",
    ),
    "user_done_playing": (
        "i am done", "im done", "done playing", "i am done playing",
        "im done playing", "i want to stop", "lets stop", "can we stop",
        "stop the game", "i am finished", "im finished", "finished",
        "no more", "no more playing", "im finished playing",
        "i am finished now", "thats enough", "that is enough", "enough playing",
        "i quit", "i want to quit", "quit", "time to stop", "lets be done",
        "all done", "im all done", "i am all done", "we are done",
        "done now", "stop playing please", "i dont want to play anymore",
        "i do not want to play anymore", "no more game",
        "game over please", "can we finish", "lets finish", "i wanna stop",
        "end the game", "the end", "this is the end", "thats all for me",
    ),
    "next_step": (
        "whats next", "what is next", "next", "next one", "next please",
        "whats the next one", "come on", "come on next",
        "come on lets go", "lets go next", "go go go", "another one",
        "give me another", "one more", "keep going", "continue",
        "next one please", "more", "more please",
        "hit me with the next one", "next move", "next move please",
        "what do we do next", "ready for the next one", "im ready for more",
        "bring on the next move", "lets keep going", "keep them coming",
        "gimme the next one", "what comes next", "so what is next",
        "ok whats next", "now whats next", "continue please",
        "on to the next one", "lets continue",
        "show me the next move", "another", "do another",
        "one more please", "next round", "go next one",
    ),
    "goodbye": (
        "bye", "bye bye", "goodbye", "see you", "see ya", "see you later",
        "bye robot", "goodbye robot", "gotta go", "i have to go",
        "i gotta go", "time to go", "im leaving", "i am leaving",
        "bye for now", "see you soon", "catch you later", "peace out bye",
        "peace out", "toodles bye", "bye now", "ok bye", "okay bye",
        "im going home", "i am going home", "i have to go home now",
        "my mom says its time to go home", "dinner time bye", "gotta run bye",
        "gotta run", "cya bye", "see you tomorrow", "bye until tomorrow",
        "farewell bye", "farewell", "bye see you", "adios bye",
        "buh bye see you", "im off bye", "byeee see you",
        "see you later alligator", "goodbye see you",
    ),
    "thanks": (
        "thanks", "thank you", "thank you so much", "thanks a lot",
        "thanks robot", "thank you robot", "many thanks", "thanks so much",
        "thank you very much", "thanks buddy", "thanks friend",
        "cheers thanks", "thanks for that", "thank you for explaining",
        "thanks for explaining", "that helps thanks", "got it thanks",
        "okay thanks", "ok thanks", "cool thanks", "awesome thanks",
        "great thanks", "nice thanks", "thanks a bunch",
        "thanks a million", "big thanks", "thank u", "thankyou",
        "thankyou thankyou", "thanks a ton", "thank you thank you",
        "thanks thanks",
        "super thanks", "thanks for telling me", "thank you for the help",
        "thanks for the help", "appreciate it thanks",
        "i appreciate it thanks", "youre the best thanks",
        "best robot ever thanks", "wow thanks", "hey thanks", "aw thanks",
    ),
    "repeat_please": (
        "say that again", "can you say that again", "repeat that",
        "repeat please", "can you repeat that", "what did you say",
        "again please", "one more time", "say it again",
        "say it one more time", "pardon", "pardon me", "sorry what",
        "what was that",
        "huh", "huh what", "huh say that again", "i did not hear you",
        "i didnt hear you",
        "didnt hear that", "come again", "could you repeat",
        "could you say that again", "repeat the move", "what move was it",
        "which move was it", "say the move again", "tell me again",
        "again", "do it again", "say it once more", "one more time please",
        "sorry i didnt hear what you said", "what did simon say",
        "what was the move", "can you repeat the move",
        "i did not hear the move", "say again", "please repeat",
        "please say it again", "eh what", "wait what", "what",
    ),
    "ask_about_bot": (
        "are you a robot", "are you a real robot", "are you real",
        "are you really a robot", "are you alive", "is a robot alive",
        "are you a machine", "are you a robot or a machine",
        "what kind of machine are you", "are you a computer",
        "is there a computer inside you", "whats inside you",
        "what is inside your head", "do you have a brain",
        "is there a brain in your head", "do you have batteries",
        "are you battery powered", "do your batteries run out",
        "are you powered by batteries", "who made you",
        "who made you robot", "who built you", "who built you robot",
        "can you think", "do you think like me", "do you have feelings",
        "do robots have feelings", "do you sleep",
        "do robots sleep at night", "do you eat", "what do robots eat",
        "do you dream", "do robots dream", "are you smart",
        "how smart are you", "do you have eyes",
        "can you see me with your eyes", "do you have ears",
        "can you hear me with your ears", "can you hear me",
        "are you a person", "is there a person inside you",
        "are you human", "are you a human or a robot", "are you magic",
        "is it magic or batteries",
    ),
    "out_of_scope": (
        "order me a pizza", "can you order pizza", "i want pizza for dinner",
        "get me a pizza", "order pizza now", "turn on the tv",
        "turn off the tv", "whats on tv tonight", "put the tv on",
        "i want to watch tv", "set a timer",
        "set a timer for ten minutes", "start a timer",
        "set the timer please", "can you set a timer", "call my grandma",
        "call grandma please", "can you call grandma", "call my mom please",
        "make a phone call", "buy me a toy", "can you buy me a toy",
        "buy me a new toy", "go buy me a toy", "play some music",
        "play music please", "turn the music on", "put some music on",
        "turn up the music", "put on a movie", "play a movie",
        "i want to watch a movie", "movie time please", "put a movie on",
        "who is the president", "is the president nice",
        "where does the president live", "tell me about the president",
        "how far is the moon", "fly me to the moon",
        "can we go to the moon", "is the moon made of cheese",
        "tell me the news", "whats in the news today",
    ),
    "complaint": (
        "this is boring", "you are boring", "this game is boring",
        "i dont like this", "i do not like this game",
        "this game is dumb", "this game is stupid", "you are too slow",
        "youre slow", "this is too easy", "this game is too easy",
        "this game is no fun", "this is not a fun game", "you are mean",
        "you are a mean robot", "youre no fun", "i hate this game",
        "this game is bad", "worst game ever", "you talk too much robot",
        "you are annoying", "this is annoying", "you are so annoying",
        "this game takes forever", "this is no fun at all",
        "you always win", "thats not fair", "not fair",
        "no fair", "you are cheating",
        "no fair you are cheating", "this is lame", "lame", "so lame",
        "i dont like your voice", "your voice is weird",
        "this is the worst", "ugh this game", "ugh",
        "boring boring boring", "i am so bored of this game",
        "meh this game",
    ),
    "request_help": (
        "help", "help me", "i need help", "can you help me", "help please",
        "please help me", "i need some help", "can you help",
        "will you help me", "help me please", "im stuck", "i am stuck",
        "stuck", "im stuck help", "i need a hand", "give me a hand",
        "hold my hand", "can someone help", "can you assist me",
        "assist me", "can you give me a hint", "hint please",
        "give me a hint", "i need a hint", "whats the answer",
        "tell me the answer", "help me out", "help me with this",
        "can you show me", "i dont understand", "i dont get it",
        "i cant figure it out", "i cant figure this out help",
        "what should i do help", "i dont get this help",
        "this is confusing help", "im lost", "i am lost", "im lost help",
        "wait help", "uh oh help", "i need help with this one",
        "i dont know what to do help",
    ),
    "user_i_am_sick": (
        "i am sick", "im sick", "i feel sick", "i feel sick today",
        "my tummy hurts", "my head hurts", "i have a headache",
        "this headache hurts", "i have a tummy ache", "my stomach hurts",
        "i feel dizzy", "im dizzy", "i am dizzy", "i think im sick",
        "i might be sick", "i have a cold", "i caught a cold",
        "im sneezing a lot", "i keep sneezing", "my nose is runny",
        "i have a runny nose", "i have a boo boo", "i have a fever",
        "i think i have a fever", "i feel hot", "my throat hurts",
        "i have a sore throat", "i feel queasy",
        "i am going to throw up", "i might throw up", "i am sick today",
        "i feel really sick", "my tummy aches",
        "i feel ill", "i am ill", "im ill", "i feel yucky",
        "i feel like i could throw up",
        "my ear hurts", "my leg hurts", "my arm hurts today",
        "i got a boo boo", "i hurt my knee", "ouch my knee hurts",
    ),
    "chitchat_like": (
        "i like pizza", "i like dogs", "i like blue",
        "my favorite color is blue", "my favorite color is red",
        "i love ice cream", "i like ice cream", "i love pizza",
        "i like trains", "i like dinosaurs", "i love dinosaurs",
        "my favorite food is pasta", "i like cookies", "i love cookies",
        "i like soccer", "i love soccer", "i like drawing",
        "i love drawing", "i like singing", "i like dancing",
        "my favorite animal is a cat", "my favorite animal is a dog",
        "i like robots", "i love robots", "i like legos", "i love legos",
        "my favorite game is tag", "i like candy", "i love candy",
        "i like the color green", "my favorite color is green",
        "i like superheroes", "i love superheroes", "i like race cars",
        "i like the beach", "i love the beach", "i like swimming",
        "my favorite fruit is apple", "i like apples", "i like bananas",
        "i love bananas",
    ),
    "chitchat_school": (
        "i go to school", "i have school tomorrow", "school was fun today",
        "i dont like homework", "i have lots of homework",
        "my teacher is nice", "my teacher is funny",
        "i learned math today", "we had a test today",
        "i have a spelling test", "i got a sticker at school",
        "i got a sticker from my teacher", "my school is big",
        "i am in first grade", "my friend is in first grade too",
        "my best friend is at school", "we played at recess",
        "recess is so fun", "i ate lunch at school",
        "school lunch is yummy", "we have art class", "art class is fun",
        "we did painting at school", "i read a book at school",
        "we read a book in class", "we sang songs in class",
        "my backpack is heavy", "my backpack is full of books",
        "my pencil broke at school", "i have new crayons at school",
        "we learned about animals", "we learned about space",
        "we took a math test at school", "we water the class plant",
        "we went on a field trip", "field trips are fun",
        "i was line leader at school today", "i have spelling words",
        "we have spelling words this week", "spelling is hard",
        "math is hard", "my school has a playground",
        "we built a volcano in class", "homework is so much work",
    ),
    "chitchat_age": (
        "i am five", "i am six", "i am seven", "i am eight years old",
        "im five years old", "im six years old", "im seven years old",
        "im eight years old", "i am five years old", "i am six and a half",
        "im almost seven", "i just turned six", "i just turned seven",
        "my birthday is soon", "my birthday is tomorrow",
        "my birthday is in june", "my birthday was yesterday",
        "i had a birthday party", "how old are you",
        "how old are you robot", "are you old", "guess how old i am",
        "guess my age", "im a big kid now", "i am a big kid",
        "my brother is ten years old", "my sister is three",
        "my sister is four", "i am older than my sister",
        "im the youngest kid", "i am the oldest kid",
        "when is your birthday", "my birthday is in winter",
        "i got presents for my birthday", "i want a bike for my birthday",
        "i will be seven soon", "being six is fun",
        "i am not a baby i am six", "i am six so i am big",
        "guess how old i am now", "seven is a lot",
    ),
    "chitchat_pet": (
        "i have a dog", "i have a cat", "i have a fish",
        "i have a hamster", "my dog is fluffy", "my cat is fluffy too",
        "my cat is fat", "my dog is named rex",
        "my cat is named whiskers", "my fish is orange",
        "my goldfish is orange", "i want a puppy", "i want a kitten",
        "our kitten is tiny", "do you have a pet", "my turtle is my pet",
        "my dog can do tricks", "my dog chases his tail",
        "my dog wags his tail", "my cat sleeps all day",
        "my cat sleeps a lot", "my cat scratched me", "i walk my dog",
        "i feed my fish", "my hamster runs on a wheel",
        "my bird can talk", "my bird is tiny", "i have a parrot",
        "my parrot can talk too", "i have a turtle", "my turtle is slow",
        "turtles are slow", "i saw a frog today", "the frog was tiny",
        "my hamster is fluffy", "my pet sleeps in my room",
        "my neighbor has a big dog", "the dog next door barks a lot",
        "my dog licks my face", "puppies are so cute", "kittens are cute",
        "my dog ate my sock", "my cat knocked over a cup",
        "we got a new puppy", "i named my fish bubbles",
        "hamsters are tiny",
    ),
    "chitchat_weather": (
        "it is sunny today", "its sunny outside", "it is raining",
        "its raining outside", "it rained all day", "it is cloudy",
        "its cloudy today", "it is windy", "its so windy",
        "the wind is loud", "it is snowing", "its snowing outside",
        "i saw snow today", "we made a snowman in the snow",
        "snow is cold", "it is hot today", "its so hot",
        "it is cold outside", "its freezing cold", "i saw a rainbow",
        "there was a rainbow today", "there was thunder last night",
        "the thunder was loud", "i heard thunder", "i saw lightning",
        "lightning is scary", "it might rain", "will it rain today",
        "is it going to snow", "i hope we get snow", "the sun is out",
        "the sun is so bright", "the clouds cover the sun",
        "i splashed in puddles", "puddles are everywhere",
        "my umbrella is red", "i forgot my umbrella",
        "it is foggy outside", "the fog is everywhere",
        "it hailed and rained yesterday", "the sun is shining today",
        "the sky is gray and cloudy", "the sky is full of clouds",
    ),
}


# ---------------------------------------------------------------------------
# profiles
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CorpusProfile:
    """Generation knobs plus the statistic targets the corpus is held to."""

    name: str = "default"
    train_stories: int = 65
    test_stories: int = 15
    train_samples_per_intent: int = 30
    test_samples_per_intent: int = 11
    digression_style: str = "resume"  # "reprompt" drops in-game re-issues

    # feature quotas, as fractions of the story count
    ask_name_rate: float = 0.05
    wrongname_rate: float = 0.05
    reciprocal_rate: float = 0.05
    doing_bad_rate: float = 0.30
    feelings_skip_rate: float = 0.25
    deny_rate: float = 0.05
    thanks_given_deny: float = 0.5
    rules_given_deny: float = 0.4
    end_goodbye_rate: float = 0.10
    digression_rate: float = 0.22
    ingame_digression_fraction: float = 0.45
    chain2_fraction: float = 0.2
    missed_rate: float = 0.04
    wrong_rate: float = 0.04
    repeat_rate: float = 0.03
    rules_ingame_rate: float = 0.03
    advance_weights: tuple[tuple[int, float], ...] = (
        (1, 0.78), (2, 0.14), (3, 0.04), (4, 0.03), (5, 0.01))
    test_advance_cap: int = 2
    test_rate_scale: float = 0.35

    # dataset statistic targets
    target_turns_train: float = 15.4
    target_turns_test: float = 14.0
    target_nongoal_fraction: float = 0.035

    # sibling artifacts
    adaptation_cases: int = 160
    distractors_per_case: int = 10
    use_dim: int = 16
    bert_dim: int = 24
    embed_noise: float = 0.1

    def to_json(self) -> dict:
        doc = asdict(self)
        doc["advance_weights"] = [list(w) for w in self.advance_weights]
        return doc

    @classmethod
    def from_json(cls, doc: dict) -> "CorpusProfile":
        doc = dict(doc)
        if "advance_weights" in doc:
            doc["advance_weights"] = tuple(
                (int(k), float(v)) for k, v in doc["advance_weights"])
        return cls(**doc)


def benchmark_profile(**overrides) -> CorpusProfile:
    """Digression-recovery benchmark: the bot resumes after in-game
    digressions without restating the pending command, so the policy
    needs memory beyond the local window."""
    base = CorpusProfile(
        name="digression-benchmark",
        digression_style="reprompt",
        train_stories=40,
        test_stories=15,
        digression_rate=0.9,
        ingame_digression_fraction=0.85,
        chain2_fraction=0.45,
        wrong_rate=0.25,
        missed_rate=0.10,
        repeat_rate=0.0,
        rules_ingame_rate=0.0,
        ask_name_rate=0.0,
        wrongname_rate=0.0,
        reciprocal_rate=0.0,
        deny_rate=0.0,
        end_goodbye_rate=0.0,
        advance_weights=((2, 0.4), (3, 0.4), (4, 0.2)),
        test_advance_cap=4,
        target_turns_train=21.5,
        target_turns_test=18.8,
        target_nongoal_fraction=0.12,
    )
    return replace(base, **overrides) if overrides else base


# ---------------------------------------------------------------------------
# story assembly
# ---------------------------------------------------------------------------

_OUT_SLOTS = ("A", "B", "C")  # after greeting, after name, after feelings

# moves a kid performs when getting a command wrong; fixed small pool so
# held-out stories never introduce unseen wrong-move intents
_TRAIN_WRONG_POOL = ("wave_hand", "touch_ears", "clap_hands",
                     "stomp_feet", "jump_up", "shake_head")


@dataclass
class _Plan:
    ask_name: bool = False
    wrongname: bool = False
    reciprocal: bool = False
    doing_bad: bool = False
    skip_feelings: bool = False
    deny: bool = False
    thanks: bool = False
    pre_rules: bool = False
    end_goodbye: bool = False
    advances: int = 1
    digs: dict = field(default_factory=lambda: {"A": [], "B": [], "C": []})
    game_digs: dict = field(default_factory=dict)  # round index -> [intents]
    events: dict = field(default_factory=dict)  # round index -> event tuple


def _assemble(plan: _Plan, style: str) -> tuple[Turn, ...]:
    turns: list[Turn] = []

    def u(label):
        turns.append(Turn(USER, label))

    def s(action):
        turns.append(Turn(SYSTEM, action))

    def out_digression(slot):
        for g in plan.digs.get(slot, ()):
            u(g)
            s(DIGRESSION_RESPONSE[g])

    def in_digression(round_idx, move):
        for g in plan.game_digs.get(round_idx, ()):
            u(g)
            s(DIGRESSION_RESPONSE[g])
            if style == "resume":
                s(simon_action(move))
            else:
                s("utter_lets_resume")

    u("greet"); s("utter_greet")
    out_digression("A")
    if plan.ask_name:
        u("user_ask_name"); s("utter_my_name")
    u("mynameis"); s("utter_nice_to_meet")
    if plan.wrongname:
        u("wrongname"); s("utter_apologize_name")
        u("mynameis"); s("utter_nice_to_meet")
    out_digression("B")
    if not plan.skip_feelings:
        if plan.reciprocal:
            u("ask_how_doing"); s("utter_doing_great")
        if plan.doing_bad:
            u("user_doing_bad"); s("utter_sorry_to_hear")
        else:
            u("user_doing_good"); s("utter_glad_to_hear")
    out_digression("C")
    if plan.deny:
        u("deny"); s("utter_explain_rules")
        if plan.thanks:
            u("thanks"); s("utter_welcome")
        if plan.pre_rules:
            u("ask_rules"); s("utter_explain_rules")
        u("next_step"); s("utter_intro_game"); s(simon_action(MOVES[0]))
    else:
        u("affirm"); s(simon_action(MOVES[0]))

    move = MOVES[0]
    for r in range(plan.advances):
        in_digression(r, move)
        event = plan.events.get(r)
        if event is not None:
            kind = event[0]
            if kind == "missed":
                u("user_missed_it"); s("utter_encourage"); s(simon_action(move))
            elif kind == "wrong":
                u(phys_intent(event[1])); s("utter_try_again"); s(simon_action(move))
            elif kind == "repeat":
                u("repeat_please"); s(simon_action(move))
            elif kind == "rules":
                u("ask_rules"); s("utter_explain_rules"); s(simon_action(move))
        u(phys_intent(move))
        if MOVES.index(move) % 2 == 1:
            s("utter_praise")
        s(simon_action(next_move(move)))
        move = next_move(move)

    u("user_done_playing"); s("utter_game_over")
    if plan.end_goodbye:
        u("goodbye"); s("utter_goodbye")
    return tuple(turns)


def _deal(rng, n: int, count: int) -> list[int]:
    count = min(count, n)
    return sorted(rng.permutation(n)[:count].tolist())


def _quota(rate: float, n: int, floor: int = 0) -> int:
    return max(floor, _round_half_up(rate * n))


def _advance_counts(rng, n: int, weights) -> list[int]:
    counts = []
    for k, w in weights:
        counts.extend([k] * _round_half_up(w * n))
    while len(counts) < n:
        counts.append(weights[0][0])
    counts = counts[:n]
    rng.shuffle(counts)
    return counts


def _nongoal_deck(rng, count: int) -> list[str]:
    deck: list[str] = []
    while len(deck) < count:
        block = list(NONGOAL_INTENTS)
        rng.shuffle(block)
        deck.extend(block)
    return deck[:count]


def _make_plans(rng, n: int, profile: CorpusProfile, is_test: bool,
                train_wrong_moves: list[str] | None = None) -> list[_Plan]:
    plans = [_Plan() for _ in range(n)]
    floor = 0 if is_test else 2
    scale = profile.test_rate_scale if is_test else 1.0

    for idx in _deal(rng, n, _quota(profile.ask_name_rate * scale, n, floor)):
        plans[idx].ask_name = True
    for idx in _deal(rng, n, _quota(profile.wrongname_rate * scale, n, floor)):
        plans[idx].wrongname = True
    for idx in _deal(rng, n, _quota(profile.reciprocal_rate * scale, n, floor)):
        plans[idx].reciprocal = True
    for idx in _deal(rng, n, _quota(profile.doing_bad_rate, n, floor)):
        plans[idx].doing_bad = True
    for idx in _deal(rng, n, _quota(profile.feelings_skip_rate, n, floor)):
        plans[idx].skip_feelings = True
    deny_ids = _deal(rng, n, _quota(profile.deny_rate * scale, n, floor))
    for j, idx in enumerate(deny_ids):
        plans[idx].deny = True
        plans[idx].thanks = j % 2 == 0 and profile.thanks_given_deny > 0
        plans[idx].pre_rules = j % 2 == 1 and profile.rules_given_deny > 0
    for idx in _deal(rng, n, _quota(profile.end_goodbye_rate * scale, n, floor)):
        plans[idx].end_goodbye = True

    advances = _advance_counts(rng, n, profile.advance_weights)
    if is_test:
        advances = [min(a, profile.test_advance_cap) for a in advances]
    for plan, a in zip(plans, advances):
        plan.advances = a

    wrong_pool = (list(train_wrong_moves) if train_wrong_moves
                  else list(_TRAIN_WRONG_POOL))

    if is_test:
        # one distinguishing card per story, cycled over kinds: held-out
        # signatures rarely collide with training ones this way
        deck = _nongoal_deck(rng, 2 * n)
        cards = ("out_dig", "repeat", "in_dig", "missed",
                 "out_dig", "wrong", "out_dig", "rules")
        if profile.digression_rate == 0:
            cards = ("repeat", "missed", "wrong", "rules")
        for i, plan in enumerate(plans):
            card = cards[i % len(cards)]
            if card == "out_dig":
                plan.digs[_OUT_SLOTS[i % 3]].append(deck.pop(0))
            elif card == "in_dig":
                plan.game_digs.setdefault(0, []).append(deck.pop(0))
            elif card == "wrong":
                options = [m for m in wrong_pool if m != MOVES[0]]
                if options:
                    plan.events[0] = ("wrong", options[i % len(options)])
            else:
                plan.events[0] = (card,)
        return plans

    # digressions: typed cards dealt over stories and slots
    dig_cards = (0 if profile.digression_rate == 0
                 else _quota(profile.digression_rate, n, 10))
    deck = _nongoal_deck(rng, dig_cards * 2)  # chain extensions draw extras
    per_story = [0] * n
    placed = 0
    guard = 0
    while placed < dig_cards and guard < dig_cards * 50:
        guard += 1
        idx = int(rng.integers(n))
        if per_story[idx] >= 2:
            continue
        plan = plans[idx]
        in_game = rng.random() < profile.ingame_digression_fraction
        chain = 2 if rng.random() < profile.chain2_fraction else 1
        gtypes = [deck.pop(0) for _ in range(chain)]
        if in_game:
            r = int(rng.integers(plan.advances))
            plan.game_digs.setdefault(r, []).extend(gtypes)
        else:
            slot = _OUT_SLOTS[int(rng.integers(len(_OUT_SLOTS)))]
            plan.digs[slot].extend(gtypes)
        per_story[idx] += 1
        placed += 1

    # in-game events
    event_specs = [
        ("missed", _quota(profile.missed_rate, n, 2)),
        ("wrong", _quota(profile.wrong_rate, n, 2)),
        ("repeat", _quota(profile.repeat_rate, n, 2)),
        ("rules", _quota(profile.rules_ingame_rate, n, 2)),
    ]
    for kind, count in event_specs:
        placed = 0
        guard = 0
        while placed < count and guard < count * 80 + 80:
            guard += 1
            idx = int(rng.integers(n))
            plan = plans[idx]
            r = int(rng.integers(plan.advances))
            if r in plan.events:
                continue
            if kind == "wrong":
                commanded = MOVES[r]
                options = [m for m in wrong_pool if m != commanded]
                if not options:
                    break
                w = options[int(rng.integers(len(options)))]
                plan.events[r] = ("wrong", w)
            else:
                plan.events[r] = (kind,)
            placed += 1
    return plans


def _rotate_digression_type(plan: _Plan) -> bool:
    for slot in _OUT_SLOTS:
        if plan.digs[slot]:
            g = plan.digs[slot][0]
            plan.digs[slot][0] = NONGOAL_INTENTS[
                (NONGOAL_INTENTS.index(g) + 1) % len(NONGOAL_INTENTS)]
            return True
    for r in sorted(plan.game_digs):
        chain = plan.game_digs[r]
        g = chain[0]
        chain[0] = NONGOAL_INTENTS[
            (NONGOAL_INTENTS.index(g) + 1) % len(NONGOAL_INTENTS)]
        return True
    return False


def _copy_plan(plan: _Plan) -> _Plan:
    return _Plan(
        ask_name=plan.ask_name, wrongname=plan.wrongname,
        reciprocal=plan.reciprocal, doing_bad=plan.doing_bad,
        skip_feelings=plan.skip_feelings,
        deny=plan.deny, thanks=plan.thanks, pre_rules=plan.pre_rules,
        end_goodbye=plan.end_goodbye, advances=plan.advances,
        digs={k: list(v) for k, v in plan.digs.items()},
        game_digs={k: list(v) for k, v in plan.game_digs.items()},
        events=dict(plan.events),
    )


def _plan_variants(plan: _Plan, is_test: bool, wrong_pool, allow_digs=True,
                   max_advances=6):
    """Yield plan variants in roughly increasing turn-count cost.

    Used to resolve story-signature collisions deterministically: the
    caller takes the first variant whose assembled turn sequence is
    unused, so collision handling never drifts the corpus statistics
    the way a random mutation walk would.
    """
    def flips(base):
        yield base
        if not base.skip_feelings:
            q = _copy_plan(base)
            q.doing_bad = not q.doing_bad
            yield q
        q2 = _copy_plan(base)
        q2.skip_feelings = not q2.skip_feelings
        yield q2
        if not q2.skip_feelings:
            q3 = _copy_plan(q2)
            q3.doing_bad = not q3.doing_bad
            yield q3

    cheap_kinds = ("repeat", "missed", "rules")
    for base in flips(plan):
        yield _copy_plan(base)
    # swap the kind of an already-dealt event (roughly turn-neutral)
    for base in flips(plan):
        for r in sorted(base.events):
            for kind in cheap_kinds:
                q = _copy_plan(base)
                q.events[r] = (kind,)
                yield q
            for w in wrong_pool:
                if w != MOVES[r]:
                    q = _copy_plan(base)
                    q.events[r] = ("wrong", w)
                    yield q
    # rotate digression topics in place (turn-neutral)
    for base in flips(plan):
        q = base
        for _ in range(len(NONGOAL_INTENTS) - 1):
            q = _copy_plan(q)
            if not _rotate_digression_type(q):
                break
            yield _copy_plan(q)
    # add one event at a free round (+2 or +3 turns)
    for base in flips(plan):
        for r in range(base.advances):
            if r in base.events:
                continue
            for kind in cheap_kinds:
                q = _copy_plan(base)
                q.events[r] = (kind,)
                yield q
            for w in wrong_pool:
                if w != MOVES[r]:
                    q = _copy_plan(base)
                    q.events[r] = ("wrong", w)
                    yield q
    # toggle the goodbye tail (+/-2 turns)
    for base in flips(plan):
        q = _copy_plan(base)
        q.end_goodbye = not q.end_goodbye
        yield q
        for r in range(q.advances):
            if r in q.events:
                continue
            for kind in cheap_kinds:
                p2 = _copy_plan(q)
                p2.events[r] = (kind,)
                yield p2
    # add an out-of-game digression (+2 turns, 30 fresh shapes)
    if allow_digs:
        for base in flips(plan):
            for slot in _OUT_SLOTS:
                if len(base.digs[slot]) >= 2:
                    continue
                for g in NONGOAL_INTENTS:
                    q = _copy_plan(base)
                    q.digs[slot].append(g)
                    yield q
    # lengthen the game; new rounds open fresh event slots
    for extra in (1, 2, 3):
        bumped = min(plan.advances + extra, max_advances)
        if bumped == plan.advances:
            break
        q = _copy_plan(plan)
        q.advances = bumped
        for base in flips(q):
            yield _copy_plan(base)
            for r in range(base.advances):
                if r in base.events:
                    continue
                for kind in cheap_kinds:
                    p2 = _copy_plan(base)
                    p2.events[r] = (kind,)
                    yield p2
                for w in wrong_pool:
                    if w != MOVES[r]:
                        p2 = _copy_plan(base)
                        p2.events[r] = ("wrong", w)
                        yield p2


def _build_stories(rng, profile: CorpusProfile, prefix: str, n: int,
                   is_test: bool, taken: set, train_wrong_moves=None) -> list[Story]:
    plans = _make_plans(rng, n, profile, is_test, train_wrong_moves)
    wrong_pool = (list(train_wrong_moves) if train_wrong_moves is not None
                  else list(_TRAIN_WRONG_POOL))
    stories = []
    for i, plan in enumerate(plans):
        chosen = None
        for cand in _plan_variants(plan, is_test, wrong_pool,
                                   allow_digs=profile.digression_rate > 0,
                                   max_advances=(profile.test_advance_cap
                                                 if is_test else 6)):
            turns = _assemble(cand, profile.digression_style)
            if turns not in taken:
                chosen = turns
                break
        if chosen is None:
            raise GenerationError(
                f"profile {profile.name!r} cannot supply {n} unique {prefix} stories")
        taken.add(chosen)
        stories.append(Story(title=f"{prefix}_{i:03d}", turns=chosen))
    return stories


def _collect_wrong_moves(stories) -> list[str]:
    moves = set()
    for s in stories:
        for i, t in enumerate(s.turns):
            if (t.speaker == SYSTEM and t.label == "utter_try_again" and i > 0
                    and s.turns[i - 1].label.startswith("phys_")):
                moves.add(s.turns[i - 1].label[len("phys_"):])
    return sorted(moves)


# ---------------------------------------------------------------------------
# sibling artifacts: intent data, embeddings, adaptation cases
# ---------------------------------------------------------------------------


def _content_tokens(text: str) -> set:
    return {t for t in tokenize(text).tokens if t not in _FRAME_WORDS}


def _repair_answerability(chosen, n_train: int, n_test: int, max_passes: int = 30):
    """Re-balance one intent's split so held-out paraphrases stay answerable.

    A held-out item whose content tokens are all unseen on the training
    side is pure OOV to a count featurizer: it tests noise, not
    generalization. Swap cue support back in from the unused remainder
    of the pool, or failing that trade the item itself into training,
    keeping both split sizes fixed.
    """
    train = list(chosen[:n_train])
    test = list(chosen[n_train:n_train + n_test])
    spare = list(chosen[n_train + n_test:])

    def union(items):
        toks: set = set()
        for t in items:
            toks |= _content_tokens(t)
        return toks

    def supported(item, pool_tokens):
        toks = _content_tokens(item)
        return not toks or bool(toks & pool_tokens)

    for _ in range(max_passes):
        bad = [x for x in test if not supported(x, union(train))]
        if not bad:
            break
        x = bad[0]
        fixed = False
        for m in spare:
            if not (_content_tokens(m) & _content_tokens(x)):
                continue
            for j in range(len(train)):
                trial = train[:j] + train[j + 1:] + [m]
                if all(supported(z, union(trial)) for z in test):
                    spare[spare.index(m)] = train[j]
                    train = trial
                    fixed = True
                    break
            if fixed:
                break
        if not fixed:
            # whole cue family fell on the test side: train on the item
            # itself and hold out a train item instead
            for j in range(len(train)):
                trial = train[:j] + train[j + 1:] + [x]
                new_test = [z for z in test if z != x] + [train[j]]
                if all(supported(z, union(trial)) for z in new_test):
                    train, test = trial, new_test
                    fixed = True
                    break
        if not fixed:
            break
    return train, test


def _build_nlu_data(rng, profile: CorpusProfile):
    for intent in GOAL_INTENTS + NONGOAL_INTENTS:
        if intent not in PARAPHRASES:
            raise GenerationError(f"no paraphrase pool for intent {intent!r}")
    owners: dict[str, str] = {}
    for intent, pool in PARAPHRASES.items():
        if len(set(pool)) != len(pool):
            dupes = sorted({t for t in pool if pool.count(t) > 1})
            raise GenerationError(f"duplicate paraphrases in {intent!r}: {dupes[:3]}")
        for text in pool:
            if text in owners:
                raise GenerationError(
                    f"paraphrase {text!r} appears under both {owners[text]!r} and {intent!r}")
            owners[text] = intent

    need = profile.train_samples_per_intent + profile.test_samples_per_intent
    train, test = [], []
    for intent in GOAL_INTENTS + NONGOAL_INTENTS:
        pool = PARAPHRASES[intent]
        if len(pool) < need:
            raise GenerationError(
                f"intent {intent!r} has {len(pool)} paraphrases, profile needs {need}")
        order = rng.permutation(len(pool))
        chosen = [pool[i] for i in order]
        tr, te = _repair_answerability(chosen, profile.train_samples_per_intent,
                                       profile.test_samples_per_intent)
        train.extend(NLUExample(t, intent) for t in tr)
        test.extend(NLUExample(t, intent) for t in te)
    return train, test


def _build_embeddings(rng, profile: CorpusProfile, examples) -> dict[str, ExternalEmbeddingTable]:
    """Stand-in sentence encoders: per-intent centroids plus noise.

    Real pretrained encoders cluster paraphrases of one intent; the
    stand-in reproduces exactly that geometry for every generated text.
    """
    tables = {}
    intents = GOAL_INTENTS + NONGOAL_INTENTS
    for source, dim in (("use", profile.use_dim), ("bert", profile.bert_dim)):
        centroids = {i: rng.normal(size=dim) for i in intents}
        entries = {}
        for ex in examples:
            noise = rng.normal(size=dim) * profile.embed_noise
            entries[ex.text] = centroids[ex.intent] + noise
        tables[source] = ExternalEmbeddingTable(dim, entries)
    return tables


_ECHO_TEMPLATES = (
    "ooh {p} , i think {p} is really cool too",
    "{p} ! i love {p} as well",
    "wow {p} , tell me more about {p}",
    "{p} sounds fun , {p} is great",
    "yay {p} , {p} is awesome",
)

_DISTRACTOR_BANK = (
    "let us try another round soon",
    "that reminds me of a happy tune",
    "robots enjoy counting numbers quietly",
    "my circuits are buzzing along nicely",
    "the next move will be exciting",
    "beep boop , processing happily",
    "i will think of a new game",
    "maybe we can march in place later",
    "my gears turn round and round",
    "the antenna on top wiggles sometimes",
    "i keep all the moves in my memory bank",
    "a tiny motor hums inside me",
    "sometimes i practice my dance steps alone",
    "counting backwards is a fun trick",
    "my buttons light up when i am excited",
    "there are many wires inside my tummy panel",
    "i can beep in three different tones",
    "standing still is easy for a robot",
    "my screen shows a smiley face",
    "clever kids make the best players",
    "one day i will learn a new trick",
    "my battery indicator glows green",
    "spinning my wheels makes a funny noise",
    "the workshop where i was built is far away",
    "i store jokes in a special folder",
    "every morning i run a systems check",
    "my speaker crackles when i laugh",
    "tiny screws hold my panels together",
    "i dream in zeros and ones",
    "my chassis is painted shiny silver",
    "the engineers gave me a squishy antenna",
    "i hum while my processor thinks",
    "blinking twice means i am listening",
    "my elbows squeak a little bit",
    "a magnet keeps my hat on straight",
    "i polish my sensors every evening",
    "whirr whirr goes my little fan",
    "my serial number ends in lucky seven",
    "i wave with three fingers sometimes",
    "calibration time is my quiet time",
)


def _content_stems(text: str) -> set:
    # delegate to the selection model's own notion of a content stem, so
    # "distractor shares nothing with the context" holds under its features
    return content_stems(tokenize(text))


_CONTEXT_POOL_INTENTS = (
    "chitchat_like", "chitchat_school", "chitchat_pet", "chitchat_weather",
    "user_doing_good", "user_doing_bad",
)


def _build_adaptation_cases(rng, profile: CorpusProfile) -> list[AdaptationCase]:
    source_texts = []
    for intent in _CONTEXT_POOL_INTENTS:
        for text in PARAPHRASES[intent]:
            if len(_content_stems(text)) >= 2:
                source_texts.append(text)
    if len(source_texts) < 20:
        raise GenerationError("not enough content-bearing context utterances")

    cases = []
    for _ in range(profile.adaptation_cases):
        for _attempt in range(200):
            i, j = rng.integers(len(source_texts)), rng.integers(len(source_texts))
            context = (source_texts[int(i)], source_texts[int(j)])
            focus = context[-1]
            words = [w for w in focus.split()
                     if is_content_word(w.lower().strip(".,?!'"))][:3]
            # the echo must carry at least two distinct context stems
            if len({stem_token(w.lower().strip(".,?!'")) for w in words}) < 2:
                continue
            phrase = " ".join(words)
            template = _ECHO_TEMPLATES[int(rng.integers(len(_ECHO_TEMPLATES)))]
            echo = template.format(p=phrase)
            ctx_stems = _content_stems(context[0]) | _content_stems(context[1])
            picks = []
            order = rng.permutation(len(_DISTRACTOR_BANK))
            for k in order:
                cand = _DISTRACTOR_BANK[int(k)]
                if not (_content_stems(cand) & ctx_stems):
                    picks.append(cand)
                if len(picks) == profile.distractors_per_case:
                    break
            if len(picks) < profile.distractors_per_case:
                continue
            pos = int(rng.integers(len(picks) + 1))
            candidates = tuple(picks[:pos] + [echo] + picks[pos:])
            cases.append(AdaptationCase(context=context, candidates=candidates,
                                        echo_index=pos))
            break
        else:
            raise GenerationError("could not assemble an adaptation case")
    return cases


# ---------------------------------------------------------------------------
# top level
# ---------------------------------------------------------------------------


@dataclass
class CorpusStats:
    n_train_stories: int
    n_test_stories: int
    samples_per_intent_mean: float
    turns_per_dialog_train: float
    turns_per_dialog_test: float
    nongoal_turn_fraction: float
    adaptation_positive_ratio: float

    def to_json(self) -> dict:
        return asdict(self)


@dataclass
class SyntheticCorpus:
    profile: CorpusProfile
    seed: int
    domain: Domain
    nlu_train: list[NLUExample]
    nlu_test: list[NLUExample]
    train_stories: list[Story]
    test_stories: list[Story]
    adaptation: list[AdaptationCase]
    embeddings: dict[str, ExternalEmbeddingTable]

    @property
    def stats(self) -> CorpusStats:
        per_intent: dict[str, int] = {}
        for ex in self.nlu_train:
            per_intent[ex.intent] = per_intent.get(ex.intent, 0) + 1
        nongoal_actions = set(DIGRESSION_RESPONSE.values())
        nongoal_intents = set(NONGOAL_INTENTS)
        total = nongoal = 0
        for s in self.train_stories:
            for t in s.turns:
                total += 1
                if (t.speaker == USER and t.label in nongoal_intents) or (
                        t.speaker == SYSTEM and t.label in nongoal_actions):
                    nongoal += 1
        return CorpusStats(
            n_train_stories=len(self.train_stories),
            n_test_stories=len(self.test_stories),
            samples_per_intent_mean=(
                sum(per_intent.values()) / len(per_intent) if per_intent else 0.0),
            turns_per_dialog_train=(
                sum(len(s) for s in self.train_stories) / max(1, len(self.train_stories))),
            turns_per_dialog_test=(
                sum(len(s) for s in self.test_stories) / max(1, len(self.test_stories))),
            nongoal_turn_fraction=nongoal / max(1, total),
            adaptation_positive_ratio=(
                1.0 / (1.0 + self.profile.distractors_per_case)),
        )

    def stats_violations(self, tolerance: float = 0.15) -> list[str]:
        stats = self.stats
        checks = (
            ("samples_per_intent_mean", stats.samples_per_intent_mean,
             float(self.profile.train_samples_per_intent)),
            ("turns_per_dialog_train", stats.turns_per_dialog_train,
             self.profile.target_turns_train),
            ("turns_per_dialog_test", stats.turns_per_dialog_test,
             self.profile.target_turns_test),
            ("nongoal_turn_fraction", stats.nongoal_turn_fraction,
             self.profile.target_nongoal_fraction),
        )
        out = []
        for name, actual, target in checks:
            if target == 0:
                continue
            rel = abs(actual - target) / abs(target)
            if rel > tolerance:
                out.append(f"{name}: {actual:.3f} vs target {target:.3f} "
                           f"({rel:+.0%} off, tolerance {tolerance:.0%})")
        return out

    def save(self, out_dir) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        self.domain.save(out / "domain.json")
        (out / "nlu_train.md").write_text(serialize_nlu_data(self.nlu_train), encoding="utf-8")
        (out / "nlu_test.md").write_text(serialize_nlu_data(self.nlu_test), encoding="utf-8")
        (out / "stories_train.md").write_text(serialize_stories(self.train_stories), encoding="utf-8")
        (out / "stories_test.md").write_text(serialize_stories(self.test_stories), encoding="utf-8")
        save_adaptation_cases(out / "adaptation.json", self.adaptation)
        for source, table in sorted(self.embeddings.items()):
            table.save(out / f"embeddings_{source}.tsv")
        import json
        with open(out / "profile.json", "w", encoding="utf-8") as fh:
            json.dump({"profile": self.profile.to_json(), "seed": self.seed},
                      fh, indent=1, sort_keys=True)
            fh.write("\n")
        with open(out / "stats.json", "w", encoding="utf-8") as fh:
            json.dump(self.stats.to_json(), fh, indent=1, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, out_dir) -> "SyntheticCorpus":
        import json
        from .corpus import parse_nlu_data, parse_stories
        from .featurize import load_external_embeddings
        out = Path(out_dir)
        with open(out / "profile.json", "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        profile = CorpusProfile.from_json(doc["profile"])
        domain = Domain.load(out / "domain.json")
        embeddings = {}
        for source in ("use", "bert"):
            p = out / f"embeddings_{source}.tsv"
            if p.exists():
                embeddings[source] = load_external_embeddings(p)
        return cls(
            profile=profile,
            seed=int(doc["seed"]),
            domain=domain,
            nlu_train=parse_nlu_data(out / "nlu_train.md"),
            nlu_test=parse_nlu_data(out / "nlu_test.md"),
            train_stories=parse_stories(out / "stories_train.md", domain=domain),
            test_stories=parse_stories(out / "stories_test.md", domain=domain),
            adaptation=load_adaptation_cases(out / "adaptation.json"),
            embeddings=embeddings,
        )


def generate_synthetic_corpus(profile: CorpusProfile | None = None,
                              seed: int = 0) -> SyntheticCorpus:
    """Generate the full seeded corpus bundle for one profile.

    Same profile + seed gives byte-identical artifacts. The default
    profile's stories are checked against the window-3 oracle; a profile
    with reprompt-style digressions is exempt because breaking that
    locality is its entire point.
    """
    profile = profile or CorpusProfile()
    rng = np.random.default_rng(seed)
    domain = build_domain()

    nlu_train, nlu_test = _build_nlu_data(rng, profile)
    taken: set = set()
    train_stories = _build_stories(rng, profile, "train", profile.train_stories,
                                   is_test=False, taken=taken)
    wrong_moves = _collect_wrong_moves(train_stories)
    test_stories = _build_stories(rng, profile, "test", profile.test_stories,
                                  is_test=True, taken=taken,
                                  train_wrong_moves=wrong_moves)

    if profile.digression_style == "resume":
        conflicts = solvability_conflicts(train_stories + test_stories)
        if conflicts:
            raise GenerationError(
                "generated stories are not window-determined:\n  "
                + "\n  ".join(conflicts[:5]))

    train_intents = {t.label for s in train_stories for t in s.turns if t.speaker == USER}
    train_actions = {t.label for s in train_stories for t in s.turns if t.speaker == SYSTEM}
    for s in test_stories:
        for t in s.turns:
            pool = train_intents if t.speaker == USER else train_actions
            if t.label not in pool:
                raise GenerationError(
                    f"test story {s.title!r} uses {t.label!r} never seen in training")

    embeddings = _build_embeddings(rng, profile, nlu_train + nlu_test)
    adaptation = _build_adaptation_cases(rng, profile)
    return SyntheticCorpus(
        profile=profile, seed=seed, domain=domain,
        nlu_train=nlu_train, nlu_test=nlu_test,
        train_stories=train_stories, test_stories=test_stories,
        adaptation=adaptation, embeddings=embeddings,
    )
