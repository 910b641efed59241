import datetime

import pytest

from newsimpact.corpus import Article
from newsimpact.gateway import BackendConfig, Gateway
from newsimpact.mock_backend import MockBackend


def make_article(i: int = 0, **overrides) -> Article:
    fields = {
        "id": f"a{i:03d}",
        "url": f"https://news.example/{i}",
        "domain": "news.example",
        "country": "US",
        "published_at": datetime.date(2022, 3, 1),
        "title": f"Chatbot story {i}",
        "body": f"A chatbot rollout raised concerns in city {i}.",
    }
    fields.update(overrides)
    return Article(**fields)


@pytest.fixture
def mock_gateway():
    return Gateway(MockBackend(seed=7), max_in_flight=4)


@pytest.fixture
def chat_config():
    return BackendConfig(base_url="mock:", model_name="chat-model", mode="chat")


@pytest.fixture
def completion_config():
    return BackendConfig(base_url="mock:", model_name="completion-model", mode="completion")


@pytest.fixture
def embedding_config():
    return BackendConfig(base_url="mock:", model_name="embed-model", mode="embedding")


@pytest.fixture
def finetune_config():
    return BackendConfig(base_url="mock:", model_name="completion-model", mode="finetune")
