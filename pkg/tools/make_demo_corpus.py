"""Regenerate the bundled demo corpus (static data; run once)."""

import json
from pathlib import Path

TOPICS = [
    (
        "chatbots",
        "Writers worry as ChatGPT drafts entire novels overnight.",
        "The new ChatGPT release can draft long-form fiction in hours. Publishers, "
        "independent authors, and self-publishing platforms are experimenting with the "
        "tool. Critics say the flood of machine-written books could crowd out human "
        "authors and depress advances across the industry.",
    ),
    (
        "surveillance",
        "City police expand facial recognition trial to train stations.",
        "A facial recognition pilot now scans commuters at four stations. Civil-liberties "
        "groups warn that constant scanning normalizes surveillance and chills free "
        "assembly, while vendors argue the system shortens investigations. The council "
        "will vote on whether to extend the trial next month.",
    ),
    (
        "transport",
        "Self-driving car fleet logs a million miles downtown.",
        "The self-driving car operator said its vehicles completed a million urban miles. "
        "Taxi unions fear job losses as the fleet grows, and safety researchers continue "
        "to examine how the cars behave around cyclists in heavy rain.",
    ),
    (
        "elections",
        "Deepfake video of mayor spreads before the runoff.",
        "Election officials scrambled after a deepfake of the mayor circulated on "
        "messaging apps. Fact-checkers flagged the clip within hours, but analysts note "
        "that synthetic media erodes trust faster than corrections can spread.",
    ),
    (
        "education",
        "Universities rewrite exams as large language model use surges.",
        "Faculty report that a large language model can pass most take-home assessments. "
        "Some departments now require oral defenses. Education researchers argue the "
        "shift could widen gaps for students without reliable internet access.",
    ),
    (
        "healthcare",
        "Machine learning triage tool cleared for emergency rooms.",
        "Hospitals are deploying a machine learning triage assistant that prioritizes "
        "incoming patients. Clinicians praise faster throughput but warn that overtrust "
        "in the ranking could delay care for atypical cases the model scores poorly.",
    ),
    (
        "advertising",
        "Generative AI floods ad market with synthetic product shots.",
        "Agencies say generative AI image tools cut production costs by half. Freelance "
        "photographers report canceled contracts, and brand-safety teams struggle to "
        "catch fabricated product claims before campaigns launch.",
    ),
    (
        "defense",
        "Parliament debates autonomous weapon procurement rules.",
        "Lawmakers heard testimony on whether an autonomous weapon system should require "
        "a human veto for every strike. Arms-control experts cautioned that delegation "
        "of targeting decisions raises the risk of civilian casualties in contested zones.",
    ),
    (
        "call centers",
        "Speech recognition bots answer half of utility hotline calls.",
        "The utility's speech recognition system now resolves routine billing questions. "
        "Consumer advocates report that customers with strong regional accents are "
        "routed in circles, and unions warn of cuts to overnight support staff.",
    ),
    (
        "justice",
        "Predictive policing contract renewed despite audit findings.",
        "An audit of the predictive policing platform found it repeatedly flagged the "
        "same neighborhoods. Community groups say patrol concentration feeds the data "
        "that justifies more patrols, while the department credits the tool for falling "
        "response times.",
    ),
    (
        "finance",
        "Neural network credit model approved by regulator.",
        "A lender won approval to score applicants with a neural network. Fair-lending "
        "researchers caution that opaque features can encode proxies for protected "
        "attributes, making adverse decisions hard to contest.",
    ),
    (
        "retail",
        "Computer vision checkout arrives in suburban groceries.",
        "Stores are replacing staffed lanes with computer vision checkout. Shoppers move "
        "faster at peak hours, but cashier roles are shrinking and mistaken theft flags "
        "have already led to confrontations at exits.",
    ),
    (
        "art",
        "Stable Diffusion exhibition divides gallery scene.",
        "A gallery devoted a floor to Stable Diffusion prints. Illustrators picketed the "
        "opening, arguing the models trained on scraped portfolios without consent, "
        "while curators defended the show as a record of a new medium.",
    ),
    (
        "workplaces",
        "Virtual reality onboarding cuts training budgets.",
        "Firms are piloting virtual reality onboarding for warehouse staff. Early data "
        "shows faster certification, though occupational physicians flag motion sickness "
        "complaints and one insurer questions liability for headset injuries.",
    ),
    (
        "law",
        "Natural language processing tools reshape contract review.",
        "Law firms adopted natural language processing software that summarizes "
        "thousand-page agreements. Junior associates fear the billable work that trained "
        "them is vanishing, and malpractice insurers ask who answers for a missed clause.",
    ),
]

COUNTRIES = ["US", "IN", "GB", "CA", "AU", "DE", "AE", "IL", "CN", "TR"]
DOMAINS = [
    "dailysignal.example",
    "technews.example",
    "worldwire.example",
    "metroherald.example",
    "sciencebeat.example",
]


def main() -> None:
    articles = []
    for i in range(40):
        beat, title, body = TOPICS[i % len(TOPICS)]
        variant = i // len(TOPICS)
        country = COUNTRIES[i % len(COUNTRIES)]
        domain = DOMAINS[i % len(DOMAINS)]
        day = 1 + (i * 7) % 27
        month = 1 + (i * 5) % 12
        year = 2020 + (i % 3)
        date = f"{year:04d}-{month:02d}-{day:02d}"
        suffix = (
            ""
            if variant == 0
            else (
                f" Regional outlets in {country} followed the story with local "
                f"reaction, and officials promised a review of the {beat} program."
            )
        )
        articles.append(
            {
                "id": f"art-{i:03d}",
                "url": f"https://{domain}/{year}/{beat.replace(' ', '-')}/{i:03d}",
                "domain": domain,
                "country": country,
                "published_at": date,
                "title": title,
                "body": body + suffix,
            }
        )
    out = Path(__file__).resolve().parents[1] / "src/newsimpact/data/demo_articles.jsonl"
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8") as fh:
        for article in articles:
            fh.write(json.dumps(article, ensure_ascii=False, sort_keys=True) + "\n")
    print(f"wrote {len(articles)} articles to {out}")


if __name__ == "__main__":
    main()
