from enum import Enum


class Profile(str, Enum):
    """Профили конфигурации"""

    desk = "desk" # Настольный масштаб
    paper = "paper" # Полный масштаб


class TrainMode(str, Enum):
    """Режимы обучения GAN"""

    unconditional = "unconditional"
    conditional = "conditional"


class BnMode(str, Enum):
    """Режим батч-нормализации"""

    train = "train"
    eval = "eval"


class PoolingMode(str, Enum):
    """Пулинг токенов в текстовом энкодере"""

    mean = "mean" # Среднее по непустым токенам
    max = "max" # Максимум по непустым токенам
    first = "first" # Первый токен


class PerceptualMode(str, Enum):
    """Метрика реконструкции дискриминатора"""

    pixel_l1 = "pixel-l1"
    random_features = "fixed-random-features"


class BackboneMode(str, Enum):
    """Бэкбон для IS/FID"""

    toy_classifier = "toy-classifier"
    random_features = "fixed-random-features"


class DatasetProfile(str, Enum):
    """Формат датасета"""

    toy = "toy"
    cub = "cub"


class Split(str, Enum):
    """Разбиение датасета"""

    train = "train"
    val = "val"


class ImageOrigin(str, Enum):
    """Происхождение батча, подаваемого в дискриминатор"""

    real = "real"
    wrong = "wrong" # Настоящее изображение с чужой подписью
    fake = "fake"
