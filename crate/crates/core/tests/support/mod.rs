pub mod tts_stub;
