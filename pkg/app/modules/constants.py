from typing import Any
from concurrent.futures import ThreadPoolExecutor

from modules.json_utils import open_json_file

# Константы
PROFILES: dict[str, Any]
COMMANDS: dict[str, Any]

# Пути к JSON файлам
files = {
    'PROFILES': 'profiles.json',
    'COMMANDS': 'commands.json',
}


def load_constants():
    """Параллельная загрузка констант"""

    with ThreadPoolExecutor() as executor:
        results = list(
            executor.map(
                open_json_file, files.values())
            )
    return dict(zip(files.keys(), results))


constants = load_constants()
globals().update(constants) # Обновляем переменные констант


class ArtifactNames:
    LOSS_CSV = 'losses.csv'
    ENCODER_METRICS_CSV = 'encoder_metrics.csv'
    METRIC_REPORT = 'metrics.json'
    ENCODER_BLOCKS = 'encoder.fgt'
    VOCABULARY = 'vocab.txt'
    EMBEDDINGS = 'embeddings.embc'
    BACKBONE_BLOCKS = 'backbone.fgt'
    FINAL_CHECKPOINT = 'final.fgan'
    DIAGNOSTIC_DUMP = 'diagnostic.json'
    DIAGNOSTIC_CHECKPOINT = 'diagnostic.fgan'
    GENERATED_GRID = 'generated.png'
    NOISE_REPORT = 'metrics_noise.json'

    @staticmethod
    def checkpoint(iteration: int) -> str:
        return f'ckpt_{iteration}.fgan'

    @staticmethod
    def sample_grid(iteration: int) -> str:
        return f'iter_{iteration}.png'


class Messages:
    RUN_DIGEST = 'Конфигурация запуска: профиль {profile}, дайджест {digest}'
    WROTE = 'Записан файл: {path}'
